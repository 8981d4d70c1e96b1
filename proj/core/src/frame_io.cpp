#include "reprocs/frame_io.hpp"

#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace reprocs {

void write_frames(const std::string& path, const Eigen::MatrixXd& frames) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    const char magic[4] = {'R', 'P', 'F', 'R'};
    out.write(magic, 4);
    const std::int64_t n = frames.rows(), count = frames.cols();
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(&count), 8);
    out.write(reinterpret_cast<const char*>(frames.data()),
              static_cast<std::streamsize>(n * count * 8));
    if (!out) throw std::runtime_error("write failure: " + path);
}

Eigen::MatrixXd read_frames(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || magic[0] != 'R' || magic[1] != 'P' || magic[2] != 'F' || magic[3] != 'R')
        throw std::runtime_error("bad frame file: " + path);
    std::int64_t n = 0, count = 0;
    in.read(reinterpret_cast<char*>(&n), 8);
    in.read(reinterpret_cast<char*>(&count), 8);
    if (!in || n <= 0 || count < 0)
        throw std::runtime_error("bad frame file header: " + path);
    Eigen::MatrixXd frames(n, count);
    in.read(reinterpret_cast<char*>(frames.data()),
            static_cast<std::streamsize>(n * count * 8));
    if (!in) throw std::runtime_error("truncated frame file: " + path);
    return frames;
}

}  // namespace reprocs
