#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

// Grid types shared by every other module.  Phase encoding is fixed project
// wide: 0 = solid, 1 = pore.  3D axis order is (z, y, x), row-major with x
// fastest; continuous volumes additionally carry a trailing channel axis.

namespace porerec {

inline constexpr std::uint8_t kSolid = 0;
inline constexpr std::uint8_t kPore = 1;

struct PhaseFraction {
    double value = 0.0;  // pore volume fraction in [0,1]
};

struct Image2D {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major, pixels[y*width + x] in {0,1}
    std::optional<double> pixel_size_um;

    Image2D() = default;
    Image2D(int w, int h, std::uint8_t fill = kSolid);

    std::uint8_t at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int y, int x) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::size_t size() const { return pixels.size(); }
};

enum class VolumeMode : std::uint16_t { Binary = 0, Continuous = 1 };

struct Volume3D {
    int dim_z = 0;  // L
    int dim_y = 0;  // H
    int dim_x = 0;  // W
    int channels = 1;
    VolumeMode mode = VolumeMode::Binary;
    std::vector<std::uint8_t> labels;  // binary mode: dim_z*dim_y*dim_x entries in {0,1}
    std::vector<double> values;        // continuous mode: z,y,x,channel order

    static Volume3D binary(int z, int y, int x, std::uint8_t fill = kSolid);
    static Volume3D continuous(int z, int y, int x, int channels = 1);

    std::size_t voxels() const {
        return static_cast<std::size_t>(dim_z) * dim_y * dim_x;
    }
    std::size_t index(int z, int y, int x) const {
        return (static_cast<std::size_t>(z) * dim_y + y) * dim_x + x;
    }
    std::uint8_t at(int z, int y, int x) const { return labels[index(z, y, x)]; }
    std::uint8_t& at(int z, int y, int x) { return labels[index(z, y, x)]; }
    double value_at(int z, int y, int x, int c = 0) const {
        return values[index(z, y, x) * channels + c];
    }
    double& value_at(int z, int y, int x, int c = 0) {
        return values[index(z, y, x) * channels + c];
    }
};

// PGM P5 I/O.  Loading thresholds gray levels at 128 (>=128 -> pore) and
// picks up an optional "# pixel_size_um <v>" header comment; saving writes
// pore pixels as 255 so a load/save cycle is the identity on binary images.
Image2D load_image(const std::string& path);
void save_image(const Image2D& img, const std::string& path);

// "MV01" container, bit-exact round trips for both modes.
void save_volume(const Volume3D& v, const std::string& path);
Volume3D load_volume(const std::string& path);

PhaseFraction porosity(const Image2D& img);
PhaseFraction porosity(const Volume3D& v);

Image2D complement(Image2D img);
Volume3D complement(Volume3D v);

}  // namespace porerec
