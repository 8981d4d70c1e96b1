#ifndef REPROCS_FRAME_IO_HPP_
#define REPROCS_FRAME_IO_HPP_

#include <Eigen/Dense>
#include <string>

namespace reprocs {

// Binary frame file: 4-byte magic "RPFR", int64 n, int64 count, then the
// frames as column-major 64-bit floats (one frame per column).
void write_frames(const std::string& path, const Eigen::MatrixXd& frames);
Eigen::MatrixXd read_frames(const std::string& path);

}  // namespace reprocs

#endif  // REPROCS_FRAME_IO_HPP_
