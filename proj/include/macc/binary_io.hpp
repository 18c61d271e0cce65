#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>

#include "macc/error.hpp"

namespace macc::io {

// Little-endian primitive writer/reader over std::fstream.

namespace detail {
inline std::uint32_t byteswap32(std::uint32_t v) {
    return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}
inline std::uint64_t byteswap64(std::uint64_t v) {
    return (std::uint64_t{byteswap32(static_cast<std::uint32_t>(v))} << 32) |
           byteswap32(static_cast<std::uint32_t>(v >> 32));
}
}  // namespace detail

class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw IoError("cannot open for writing: " + path.string());
    }

    void magic(std::string_view m) { raw(m.data(), m.size()); }

    void u32(std::uint32_t v) {
        if constexpr (std::endian::native == std::endian::big) v = detail::byteswap32(v);
        raw(&v, sizeof v);
    }

    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        if constexpr (std::endian::native == std::endian::big) bits = detail::byteswap64(bits);
        raw(&bits, sizeof bits);
    }

    void f64s(std::span<const double> vs) {
        if constexpr (std::endian::native == std::endian::little) {
            raw(vs.data(), vs.size_bytes());
        } else {
            for (double v : vs) f64(v);
        }
    }

    void finish() {
        out_.flush();
        if (!out_) throw IoError("write failed: " + path_.string());
    }

private:
    void raw(const void* p, std::size_t n) {
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
        if (!out_) throw IoError("write failed: " + path_.string());
    }

    std::filesystem::path path_;
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw IoError("cannot open for reading: " + path.string());
    }

    void expect_magic(std::string_view m) {
        std::string got(m.size(), '\0');
        raw(got.data(), got.size());
        if (got != m) throw IoError(path_.string() + ": bad magic, expected " + std::string(m));
    }

    std::uint32_t u32() {
        std::uint32_t v;
        raw(&v, sizeof v);
        if constexpr (std::endian::native == std::endian::big) v = detail::byteswap32(v);
        return v;
    }

    double f64() {
        std::uint64_t bits;
        raw(&bits, sizeof bits);
        if constexpr (std::endian::native == std::endian::big) bits = detail::byteswap64(bits);
        double v;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    }

    void f64s(std::span<double> vs) {
        if constexpr (std::endian::native == std::endian::little) {
            raw(vs.data(), vs.size_bytes());
        } else {
            for (auto& v : vs) v = f64();
        }
    }

    void expect_eof() {
        if (in_.peek() != std::char_traits<char>::eof()) throw IoError(path_.string() + ": trailing bytes");
    }

private:
    void raw(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (!in_) throw IoError(path_.string() + ": truncated file");
    }

    std::filesystem::path path_;
    std::ifstream in_;
};

}  // namespace macc::io
