#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nwadapt/layers.hpp"
#include "nwadapt/prune.hpp"
#include "nwadapt/util.hpp"

namespace nwadapt {

struct WidthChange {
  std::string name;
  std::size_t before = 0;
  std::size_t after = 0;
};

struct ArchDelta {
  std::vector<WidthChange> layers;
  std::size_t params_before = 0;
  std::size_t params_after = 0;
  std::uint64_t flops_before = 0;
  std::uint64_t flops_after = 0;
};

Json arch_delta_to_json(const ArchDelta& delta);

// Removes every masked-out filter (weights and bias) and the matching input
// slices of the next parameterized layer: input channels of a conv, input
// columns of a dense layer, or the S = H*W consecutive features
// [k*S, (k+1)*S) of channel k when a flatten sits in between. Surviving
// weights are copied unchanged and keep their relative order.
std::pair<Network, ArchDelta> apply_masks(const Network& net, const PruneDecision& decision);

// Weight plus bias elements over all parameterized layers.
std::size_t count_params(const NetworkSpec& spec);
std::size_t count_params(const Network& net);

// Per image: conv 2*K*C*kh*kw*Ho*Wo, dense 2*out*in; relu, pooling, dropout
// and flatten count zero. `input_hw` overrides the spec's spatial input extent.
std::uint64_t count_flops(const NetworkSpec& spec, std::optional<std::size_t> input_hw = std::nullopt);
std::uint64_t count_flops(const Network& net, std::optional<std::size_t> input_hw = std::nullopt);

// Output widths of the prunable layers, in network order.
std::vector<std::pair<std::string, std::size_t>> prunable_widths(const NetworkSpec& spec);

}  // namespace nwadapt
