#pragma once

#include <string>
#include <vector>

#include "nwadapt/layers.hpp"
#include "nwadapt/rng.hpp"

namespace nwadapt {

inline constexpr const char* kToolVersion = "0.1.0";

// Entry point of the nwadapt binary. Returns the process exit status: 0 on
// success, 2 on usage errors, 3 on data or model errors, 4 on numerical
// divergence. Errors are reported as one JSON object on stderr.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

// Copy of `net` whose classifier head has `num_classes` outputs, freshly
// He-initialized; every other layer keeps its parameters.
Network with_fresh_head(const Network& net, std::size_t num_classes, Rng& rng);

}  // namespace nwadapt
