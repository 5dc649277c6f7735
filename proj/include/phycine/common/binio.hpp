#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "phycine/common/error.hpp"

namespace phycine {

// Little-endian binary file helpers. Reads raise Data errors on truncation
// so corrupt containers fail cleanly instead of yielding garbage.
static_assert(std::endian::native == std::endian::little,
              "binary containers are little-endian; add byte swapping for this platform");

class BinWriter {
public:
    explicit BinWriter(const std::string& path) : f_(path, std::ios::binary) {
        if (!f_) raise(ErrorKind::Data, "cannot open for writing: " + path);
        path_ = path;
    }
    void bytes(const void* p, std::size_t n) {
        f_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
        if (!f_) raise(ErrorKind::Data, "write failed: " + path_);
    }
    void u32(std::uint32_t v) { bytes(&v, 4); }
    void u64(std::uint64_t v) { bytes(&v, 8); }
    void i32(std::int32_t v) { bytes(&v, 4); }
    void f32(float v) { bytes(&v, 4); }
    void f64(double v) { bytes(&v, 8); }
    void magic(const char m[5]) { bytes(m, 4); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    std::uint64_t tell() { return static_cast<std::uint64_t>(f_.tellp()); }
    void close() {
        f_.close();
        if (!f_) raise(ErrorKind::Data, "close failed: " + path_);
    }

private:
    std::ofstream f_;
    std::string path_;
};

class BinReader {
public:
    explicit BinReader(const std::string& path) : f_(path, std::ios::binary) {
        if (!f_) raise(ErrorKind::Data, "cannot open: " + path);
        path_ = path;
    }
    void bytes(void* p, std::size_t n) {
        f_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(f_.gcount()) != n)
            raise(ErrorKind::Data, "truncated file: " + path_);
    }
    std::uint32_t u32() {
        std::uint32_t v;
        bytes(&v, 4);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        bytes(&v, 8);
        return v;
    }
    std::int32_t i32() {
        std::int32_t v;
        bytes(&v, 4);
        return v;
    }
    float f32() {
        float v;
        bytes(&v, 4);
        return v;
    }
    double f64() {
        double v;
        bytes(&v, 8);
        return v;
    }
    void expect_magic(const char m[5], const std::string& what) {
        char got[4];
        bytes(got, 4);
        if (std::memcmp(got, m, 4) != 0)
            raise(ErrorKind::Data, "bad magic in " + path_ + ": not a " + what + " file");
    }
    std::string str(std::size_t max_len = 1 << 20) {
        const std::uint32_t n = u32();
        if (n > max_len) raise(ErrorKind::Data, "string too long in " + path_);
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
    bool at_eof() {
        return f_.peek() == std::char_traits<char>::eof();
    }

private:
    std::ifstream f_;
    std::string path_;
};

}  // namespace phycine
