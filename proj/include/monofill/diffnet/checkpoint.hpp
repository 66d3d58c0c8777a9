#pragma once

#include <string>

#include "monofill/diffnet/network.hpp"

namespace monofill::diffnet {

// Checkpoint byte layout (all integers and floats little-endian):
//
//   offset  size  field
//   0       8     magic "MFCKPT\0\0"
//   8       4     format version (uint32, currently 1)
//   12      4     scalar width in bytes (uint32, 4 = float32, 8 = float64)
//   16      4     entry count (uint32)
//   then per entry:
//           4     name length L (uint32)
//           L     name, UTF-8, no terminator
//           1     trainable flag (0/1)
//           32    shape n, c, h, w (4 x uint64)
//           n*c*h*w*width  values, IEEE-754
//
// Loading converts between float32 and float64 as needed.

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename Scalar>
void save_checkpoint(const NetworkParams<Scalar>& params, const std::string& path);

template <typename Scalar>
NetworkParams<Scalar> load_checkpoint(const std::string& path);

extern template void save_checkpoint<float>(const NetworkParams<float>&, const std::string&);
extern template void save_checkpoint<double>(const NetworkParams<double>&, const std::string&);
extern template NetworkParams<float> load_checkpoint<float>(const std::string&);
extern template NetworkParams<double> load_checkpoint<double>(const std::string&);

}  // namespace monofill::diffnet
