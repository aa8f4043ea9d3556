#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedsup {

// Malformed or truncated binary input; the message names the byte offset.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : std::runtime_error(what + " at offset " + std::to_string(offset)),
          offset_(offset) {}
    std::uint64_t offset() const { return offset_; }

private:
    std::uint64_t offset_;
};

// Little-endian writer over an in-memory buffer.
class BinWriter {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
    void f32_array(const float* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) f32(p[i]);
    }
    void magic(const char m[4]) {
        buf_.insert(buf_.end(), m, m + 4);
    }
    const std::vector<std::uint8_t>& bytes() const { return buf_; }

    void write_file(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
        out.write(reinterpret_cast<const char*>(buf_.data()),
                  static_cast<std::streamsize>(buf_.size()));
        if (!out) throw std::runtime_error("write failed: " + path.string());
    }

private:
    std::vector<std::uint8_t> buf_;
};

// Little-endian reader with offset tracking for error reporting.
class BinReader {
public:
    explicit BinReader(std::vector<std::uint8_t> bytes) : buf_(std::move(bytes)) {}

    static BinReader from_file(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
        std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
        return BinReader(std::move(bytes));
    }

    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    float f32(const char* what) {
        const std::uint32_t bits = u32(what);
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    void f32_array(float* p, std::size_t n, const char* what) {
        need(4 * n, what);
        for (std::size_t i = 0; i < n; ++i) {
            std::uint32_t bits = 0;
            for (int k = 0; k < 4; ++k)
                bits |= static_cast<std::uint32_t>(buf_[pos_ + 4 * i + k]) << (8 * k);
            std::memcpy(&p[i], &bits, 4);
        }
        pos_ += 4 * n;
    }
    void expect_magic(const char m[4], const char* what) {
        need(4, what);
        if (std::memcmp(buf_.data() + pos_, m, 4) != 0)
            throw FormatError(std::string("bad magic, expected ") + std::string(m, 4), pos_);
        pos_ += 4;
    }
    void expect_end(const char* what) {
        if (pos_ != buf_.size())
            throw FormatError(std::string("trailing bytes after ") + what, pos_);
    }
    std::uint64_t offset() const { return pos_; }

private:
    void need(std::size_t n, const char* what) {
        if (pos_ + n > buf_.size())
            throw FormatError(std::string("truncated ") + what, pos_);
    }
    std::vector<std::uint8_t> buf_;
    std::size_t pos_ = 0;
};

}  // namespace fedsup
