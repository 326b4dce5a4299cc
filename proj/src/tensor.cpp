#include "nwadapt/tensor.hpp"

namespace nwadapt {

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

void validate_shape(const Shape& shape) {
  if (shape.empty()) fail(ErrorKind::invalid_shape, "shape must have at least one axis");
  if (shape.size() > kMaxRank) fail(ErrorKind::invalid_shape, "rank above 4: " + shape_string(shape));
  for (std::size_t e : shape) {
    if (e == 0) fail(ErrorKind::invalid_shape, "zero extent in shape " + shape_string(shape));
  }
}

}  // namespace nwadapt
