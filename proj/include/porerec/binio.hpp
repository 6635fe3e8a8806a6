#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

// Little-endian primitives for the container formats plus the CRC32 used by
// the model file.  Everything goes through byte buffers so the on-disk layout
// is independent of host endianness.

namespace porerec::binio {

inline void put_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!os) throw std::runtime_error("binio: write failed");
}

inline void get_bytes(std::istream& is, void* p, std::size_t n) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
        throw std::runtime_error("binio: unexpected end of file");
}

template <typename T>
void put_le(std::ostream& os, T value) {
    static_assert(std::is_integral_v<T>);
    unsigned char buf[sizeof(T)];
    using U = std::make_unsigned_t<T>;
    U u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xffu);
    put_bytes(os, buf, sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
    static_assert(std::is_integral_v<T>);
    unsigned char buf[sizeof(T)];
    get_bytes(is, buf, sizeof(T));
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(buf[i]) << (8 * i);
    return static_cast<T>(u);
}

inline void put_f64(std::ostream& os, double value) {
    std::uint64_t bits;
    std::memcpy(&bits, &value, sizeof(bits));
    put_le<std::uint64_t>(os, bits);
}

inline double get_f64(std::istream& is) {
    std::uint64_t bits = get_le<std::uint64_t>(is);
    double value;
    std::memcpy(&value, &bits, sizeof(value));
    return value;
}

// Plain table-less CRC32 (reflected, polynomial 0xEDB88320), bit-for-bit the
// common zlib definition.  The model writer feeds it every byte after the
// magic; speed is irrelevant at those sizes.
class Crc32 {
public:
    void update(const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            state_ ^= b[i];
            for (int k = 0; k < 8; ++k)
                state_ = (state_ >> 1) ^ (0xEDB88320u & (0u - (state_ & 1u)));
        }
    }
    std::uint32_t value() const { return state_ ^ 0xffffffffu; }

private:
    std::uint32_t state_ = 0xffffffffu;
};

inline std::uint32_t crc32(const void* p, std::size_t n) {
    Crc32 c;
    c.update(p, n);
    return c.value();
}

// Stream adaptor that mirrors everything written into a CRC accumulator.
class CrcWriter {
public:
    explicit CrcWriter(std::ostream& os) : os_(os) {}
    void bytes(const void* p, std::size_t n) {
        put_bytes(os_, p, n);
        crc_.update(p, n);
    }
    template <typename T>
    void le(T value) {
        unsigned char buf[sizeof(T)];
        using U = std::make_unsigned_t<T>;
        U u = static_cast<U>(value);
        for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xffu);
        bytes(buf, sizeof(T));
    }
    void f64(double value) {
        std::uint64_t bits;
        std::memcpy(&bits, &value, sizeof(bits));
        le<std::uint64_t>(bits);
    }
    std::uint32_t crc() const { return crc_.value(); }

private:
    std::ostream& os_;
    Crc32 crc_;
};

class CrcReader {
public:
    explicit CrcReader(std::istream& is) : is_(is) {}
    void bytes(void* p, std::size_t n) {
        get_bytes(is_, p, n);
        crc_.update(p, n);
    }
    template <typename T>
    T le() {
        unsigned char buf[sizeof(T)];
        bytes(buf, sizeof(T));
        using U = std::make_unsigned_t<T>;
        U u = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(buf[i]) << (8 * i);
        return static_cast<T>(u);
    }
    double f64() {
        std::uint64_t bits = le<std::uint64_t>();
        double value;
        std::memcpy(&value, &bits, sizeof(value));
        return value;
    }
    std::uint32_t crc() const { return crc_.value(); }

private:
    std::istream& is_;
    Crc32 crc_;
};

}  // namespace porerec::binio
