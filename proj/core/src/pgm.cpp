#include "safepatch/pgm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace safepatch {

std::string image_to_pgm(const Tensor& image) {
    if (image.shape() != Shape{1, kImageSize, kImageSize})
        throw InvalidImageError("image_to_pgm: expected [1,16,16]");
    std::ostringstream os;
    os << "P2\n" << kImageSize << " " << kImageSize << "\n255\n";
    for (int y = 0; y < kImageSize; ++y) {
        for (int x = 0; x < kImageSize; ++x) {
            const double v = image.data()[y * kImageSize + x];
            const int g = std::clamp(static_cast<int>(std::lround((v + 1.0) * 127.5)), 0, 255);
            os << g << (x + 1 == kImageSize ? "" : " ");
        }
        os << "\n";
    }
    return os.str();
}

void write_pgm(const std::string& path, const Tensor& image) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw IoError("write_pgm: cannot open " + path);
    f << image_to_pgm(image);
    if (!f)
        throw IoError("write_pgm: write failed for " + path);
}

std::string image_to_ascii(const Tensor& image) {
    static const char ramp[] = " .:-=+*#%@";
    std::ostringstream os;
    for (int y = 0; y < kImageSize; ++y) {
        for (int x = 0; x < kImageSize; ++x) {
            const double v = (image.data()[y * kImageSize + x] + 1.0) / 2.0;
            os << ramp[std::clamp(static_cast<int>(v * 10.0), 0, 9)];
        }
        os << "\n";
    }
    return os.str();
}

} // namespace safepatch
