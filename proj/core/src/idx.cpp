#include <cstdint>
#include <fstream>
#include <vector>

#include "uqlab/data.hpp"

namespace uqlab {

Tensor load_idx(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RuntimeFailure("idx: cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 4 || bytes[0] != 0 || bytes[1] != 0) {
        throw ValueError("idx: bad magic in " + path);
    }
    const unsigned type = bytes[2];
    const unsigned ndim = bytes[3];
    if (type != 0x08) {
        throw ValueError("idx: unsupported type code " + std::to_string(type) + " in " + path);
    }
    if (ndim == 0) throw ValueError("idx: zero dimensions in " + path);
    const std::size_t header = 4 + 4 * static_cast<std::size_t>(ndim);
    if (bytes.size() < header) throw ValueError("idx: truncated header in " + path);

    Shape shape(ndim);
    std::size_t numel = 1;
    for (unsigned d = 0; d < ndim; ++d) {
        const std::size_t off = 4 + 4 * d;
        const std::uint32_t v = (std::uint32_t(bytes[off]) << 24) |
                                (std::uint32_t(bytes[off + 1]) << 16) |
                                (std::uint32_t(bytes[off + 2]) << 8) |
                                std::uint32_t(bytes[off + 3]);
        shape[d] = v;
        numel *= v;
    }
    if (bytes.size() - header != numel) {
        throw ValueError("idx: payload of " + std::to_string(bytes.size() - header) +
                         " bytes does not match dims " + shape_str(shape) + " in " + path);
    }
    Tensor t(shape);
    const double scale = ndim >= 2 ? 1.0 / 255.0 : 1.0;  // label vectors stay integral
    for (std::size_t i = 0; i < numel; ++i) {
        t.values[i] = static_cast<double>(bytes[header + i]) * scale;
    }
    return t;
}

Tensor downsample_images(const Tensor& images, std::size_t factor) {
    if (images.rank() != 3) throw ValueError("downsample: expects [N,H,W] images");
    if (factor == 0) throw ValueError("downsample: zero factor");
    const std::size_t n = images.shape[0], h = images.shape[1], w = images.shape[2];
    if (h % factor != 0 || w % factor != 0) {
        throw ValueError("downsample: factor " + std::to_string(factor) +
                         " does not divide " + shape_str(images.shape));
    }
    const std::size_t oh = h / factor, ow = w / factor;
    Tensor out({n, oh * ow});
    const double inv = 1.0 / static_cast<double>(factor * factor);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t r = 0; r < oh; ++r) {
            for (std::size_t c = 0; c < ow; ++c) {
                double acc = 0.0;
                for (std::size_t dr = 0; dr < factor; ++dr)
                    for (std::size_t dc = 0; dc < factor; ++dc)
                        acc += images.values[(i * h + r * factor + dr) * w + c * factor + dc];
                out.values[i * (oh * ow) + r * ow + c] = acc * inv;
            }
        }
    }
    return out;
}

} // namespace uqlab
