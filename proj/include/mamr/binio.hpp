#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mamr::io {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are not supported");

/// Corrupt or foreign file: leading magic bytes do not match.
struct BadMagicError : std::runtime_error {
    explicit BadMagicError(const std::string& what) : std::runtime_error(what) {}
};

/// Recognized file with an unsupported format version.
struct VersionError : std::runtime_error {
    explicit VersionError(const std::string& what) : std::runtime_error(what) {}
};

/// File ends before the declared payload does.
struct TruncatedError : std::runtime_error {
    explicit TruncatedError(const std::string& what) : std::runtime_error(what) {}
};

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot open for writing: " + path);
    }

    void bytes(const void* p, std::size_t n) {
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    }
    template <typename T>
    void value(T v) {
        bytes(&v, sizeof(T));
    }
    void magic(const char (&m)[5]) { bytes(m, 4); }

    void close() {
        out_.close();
        if (!out_) throw std::runtime_error("write failed");
    }

private:
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw std::runtime_error("cannot open for reading: " + path);
    }

    void bytes(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n)
            throw TruncatedError(path_ + ": truncated (wanted " + std::to_string(n) +
                                 " more bytes)");
    }
    template <typename T>
    T value() {
        T v;
        bytes(&v, sizeof(T));
        return v;
    }
    void expect_magic(const char (&m)[5], const std::string& kind) {
        char got[4];
        bytes(got, 4);
        if (std::memcmp(got, m, 4) != 0)
            throw BadMagicError(path_ + ": bad magic, not a " + kind + " file");
    }
    bool at_eof() {
        in_.peek();
        return in_.eof();
    }

private:
    std::ifstream in_;
    std::string path_;
};

}  // namespace mamr::io
