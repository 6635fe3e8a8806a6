#include "porerec/volume.hpp"

#include <cctype>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "porerec/binio.hpp"

namespace porerec {

Image2D::Image2D(int w, int h, std::uint8_t fill) : width(w), height(h) {
    if (w < 1 || h < 1) throw std::invalid_argument("Image2D: dims must be >= 1");
    pixels.assign(static_cast<std::size_t>(w) * h, fill);
}

Volume3D Volume3D::binary(int z, int y, int x, std::uint8_t fill) {
    if (z < 1 || y < 1 || x < 1) throw std::invalid_argument("Volume3D: dims must be >= 1");
    Volume3D v;
    v.dim_z = z;
    v.dim_y = y;
    v.dim_x = x;
    v.channels = 1;
    v.mode = VolumeMode::Binary;
    v.labels.assign(v.voxels(), fill);
    return v;
}

Volume3D Volume3D::continuous(int z, int y, int x, int channels) {
    if (z < 1 || y < 1 || x < 1 || channels < 1)
        throw std::invalid_argument("Volume3D: dims and channels must be >= 1");
    Volume3D v;
    v.dim_z = z;
    v.dim_y = y;
    v.dim_x = x;
    v.channels = channels;
    v.mode = VolumeMode::Continuous;
    v.values.assign(v.voxels() * channels, 0.0);
    return v;
}

namespace {

// Reads one whitespace-delimited PGM header token, skipping '#' comments but
// remembering any pixel-size annotation they carry.
std::string pgm_token(std::istream& is, std::optional<double>& pixel_size) {
    for (;;) {
        int ch = is.get();
        if (ch == EOF) throw std::runtime_error("PGM: truncated header");
        if (std::isspace(ch)) continue;
        if (ch == '#') {
            std::string comment;
            std::getline(is, comment);
            std::istringstream cs(comment);
            std::string key;
            double v;
            if (cs >> key >> v && key == "pixel_size_um") pixel_size = v;
            continue;
        }
        std::string tok(1, static_cast<char>(ch));
        while (is.good()) {
            int nx = is.peek();
            if (nx == EOF || std::isspace(nx) || nx == '#') break;
            tok.push_back(static_cast<char>(is.get()));
        }
        return tok;
    }
}

int pgm_int(std::istream& is, std::optional<double>& pixel_size, const char* what) {
    std::string tok = pgm_token(is, pixel_size);
    try {
        std::size_t pos = 0;
        long v = std::stol(tok, &pos);
        if (pos != tok.size() || v < 0) throw std::invalid_argument(tok);
        return static_cast<int>(v);
    } catch (const std::exception&) {
        throw std::runtime_error(std::string("PGM: bad ") + what + " field '" + tok + "'");
    }
}

}  // namespace

Image2D load_image(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_image: cannot open " + path);

    std::optional<double> pixel_size;
    std::string magic = pgm_token(is, pixel_size);
    if (magic != "P5")
        throw std::runtime_error("load_image: unsupported format '" + magic +
                                 "' (need binary PGM, P5)");
    int width = pgm_int(is, pixel_size, "width");
    int height = pgm_int(is, pixel_size, "height");
    int maxval = pgm_int(is, pixel_size, "maxval");
    if (width < 1 || height < 1) throw std::runtime_error("load_image: empty image");
    if (maxval != 255)
        throw std::runtime_error("load_image: only 8-bit PGM supported (maxval 255, got " +
                                 std::to_string(maxval) + ")");
    // Exactly one whitespace byte separates the header from the payload.
    int sep = is.get();
    if (sep == EOF || !std::isspace(sep)) throw std::runtime_error("load_image: malformed header");

    std::vector<std::uint8_t> raw(static_cast<std::size_t>(width) * height);
    binio::get_bytes(is, raw.data(), raw.size());

    Image2D img(width, height);
    img.pixel_size_um = pixel_size;
    for (std::size_t i = 0; i < raw.size(); ++i) img.pixels[i] = raw[i] >= 128 ? kPore : kSolid;
    return img;
}

void save_image(const Image2D& img, const std::string& path) {
    if (img.width < 1 || img.height < 1) throw std::invalid_argument("save_image: empty image");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_image: cannot open " + path);
    os << "P5\n";
    if (img.pixel_size_um) os << "# pixel_size_um " << *img.pixel_size_um << "\n";
    os << img.width << " " << img.height << "\n255\n";
    std::vector<std::uint8_t> raw(img.pixels.size());
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = img.pixels[i] ? 255 : 0;
    binio::put_bytes(os, raw.data(), raw.size());
    if (!os) throw std::runtime_error("save_image: write failed for " + path);
}

namespace {
constexpr char kVolumeMagic[4] = {'M', 'V', '0', '1'};
constexpr std::uint16_t kVolumeVersion = 1;
}  // namespace

void save_volume(const Volume3D& v, const std::string& path) {
    const std::size_t n = v.voxels();
    if (n == 0) throw std::invalid_argument("save_volume: empty volume");
    if (v.mode == VolumeMode::Binary) {
        if (v.channels != 1 || v.labels.size() != n)
            throw std::invalid_argument("save_volume: inconsistent binary volume");
    } else if (v.values.size() != n * static_cast<std::size_t>(v.channels)) {
        throw std::invalid_argument("save_volume: inconsistent continuous volume");
    }

    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_volume: cannot open " + path);
    binio::put_bytes(os, kVolumeMagic, 4);
    binio::put_le<std::uint16_t>(os, kVolumeVersion);
    binio::put_le<std::uint16_t>(os, static_cast<std::uint16_t>(v.mode));
    binio::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(v.dim_z));
    binio::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(v.dim_y));
    binio::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(v.dim_x));
    binio::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(v.channels));
    if (v.mode == VolumeMode::Binary) {
        binio::put_bytes(os, v.labels.data(), v.labels.size());
    } else {
        for (double d : v.values) binio::put_f64(os, d);
    }
    if (!os) throw std::runtime_error("save_volume: write failed for " + path);
}

Volume3D load_volume(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_volume: cannot open " + path);
    char magic[4];
    binio::get_bytes(is, magic, 4);
    if (std::memcmp(magic, kVolumeMagic, 4) != 0)
        throw std::runtime_error("load_volume: bad magic in " + path);
    std::uint16_t version = binio::get_le<std::uint16_t>(is);
    if (version != kVolumeVersion)
        throw std::runtime_error("load_volume: unsupported version " + std::to_string(version));
    std::uint16_t mode = binio::get_le<std::uint16_t>(is);
    if (mode > 1) throw std::runtime_error("load_volume: unknown mode " + std::to_string(mode));
    std::uint64_t dz = binio::get_le<std::uint32_t>(is);
    std::uint64_t dy = binio::get_le<std::uint32_t>(is);
    std::uint64_t dx = binio::get_le<std::uint32_t>(is);
    std::uint64_t ch = binio::get_le<std::uint32_t>(is);
    if (dz == 0 || dy == 0 || dx == 0 || ch == 0)
        throw std::runtime_error("load_volume: zero dimension");
    std::uint64_t n = dz * dy * dx;
    if (n > (std::uint64_t{1} << 34) || n * ch > (std::uint64_t{1} << 34))
        throw std::runtime_error("load_volume: dimension overflow");

    Volume3D v;
    v.dim_z = static_cast<int>(dz);
    v.dim_y = static_cast<int>(dy);
    v.dim_x = static_cast<int>(dx);
    v.channels = static_cast<int>(ch);
    v.mode = static_cast<VolumeMode>(mode);
    if (v.mode == VolumeMode::Binary) {
        if (ch != 1) throw std::runtime_error("load_volume: binary mode requires C=1");
        v.labels.resize(n);
        binio::get_bytes(is, v.labels.data(), n);
        for (std::uint8_t b : v.labels)
            if (b > 1) throw std::runtime_error("load_volume: non-binary label in binary volume");
    } else {
        v.values.resize(n * ch);
        for (double& d : v.values) d = binio::get_f64(is);
    }
    return v;
}

PhaseFraction porosity(const Image2D& img) {
    if (img.pixels.empty()) throw std::invalid_argument("porosity: empty image");
    std::size_t pore = 0;
    for (std::uint8_t p : img.pixels) pore += p;
    return {static_cast<double>(pore) / static_cast<double>(img.pixels.size())};
}

PhaseFraction porosity(const Volume3D& v) {
    if (v.mode != VolumeMode::Binary)
        throw std::invalid_argument("porosity: defined for binary volumes only");
    if (v.labels.empty()) throw std::invalid_argument("porosity: empty volume");
    std::size_t pore = 0;
    for (std::uint8_t p : v.labels) pore += p;
    return {static_cast<double>(pore) / static_cast<double>(v.labels.size())};
}

Image2D complement(Image2D img) {
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(1 - p);
    return img;
}

Volume3D complement(Volume3D v) {
    if (v.mode != VolumeMode::Binary)
        throw std::invalid_argument("complement: defined for binary volumes only");
    for (auto& p : v.labels) p = static_cast<std::uint8_t>(1 - p);
    return v;
}

}  // namespace porerec
