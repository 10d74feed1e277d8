#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "straggler/errors.hpp"

namespace straggler {

/// Little-endian byte sink for the wire formats.
class ByteWriter {
public:
    void u8(uint8_t v) { buf_.push_back(v); }

    void u16(uint16_t v) { uint_le(v, 2); }
    void u32(uint32_t v) { uint_le(v, 4); }
    void u64(uint64_t v) { uint_le(v, 8); }
    void i64(int64_t v) { uint_le(static_cast<uint64_t>(v), 8); }

    /// Writes the low `nbytes` bytes of v, little-endian.
    void uint_le(uint64_t v, unsigned nbytes) {
        for (unsigned i = 0; i < nbytes; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }

    void raw(const uint8_t* data, std::size_t len) { buf_.insert(buf_.end(), data, data + len); }
    void raw(std::span<const uint8_t> data) { raw(data.data(), data.size()); }

    const std::vector<uint8_t>& bytes() const { return buf_; }
    std::vector<uint8_t> take() { return std::move(buf_); }

private:
    std::vector<uint8_t> buf_;
};

/// Little-endian byte source; throws ParseError on underrun or trailing data.
class ByteReader {
public:
    explicit ByteReader(std::span<const uint8_t> data) : data_(data) {}

    uint8_t u8() { return static_cast<uint8_t>(uint_le(1)); }
    uint16_t u16() { return static_cast<uint16_t>(uint_le(2)); }
    uint32_t u32() { return static_cast<uint32_t>(uint_le(4)); }
    uint64_t u64() { return uint_le(8); }
    int64_t i64() { return static_cast<int64_t>(uint_le(8)); }

    uint64_t uint_le(unsigned nbytes) {
        need(nbytes);
        uint64_t v = 0;
        for (unsigned i = 0; i < nbytes; ++i) v |= static_cast<uint64_t>(data_[pos_ + i]) << (8 * i);
        pos_ += nbytes;
        return v;
    }

    void raw(uint8_t* out, std::size_t len) {
        need(len);
        std::memcpy(out, data_.data() + pos_, len);
        pos_ += len;
    }

    /// A view of the next `len` bytes (valid while the source buffer lives).
    std::span<const uint8_t> bytes(std::size_t len) {
        need(len);
        auto out = data_.subspan(pos_, len);
        pos_ += len;
        return out;
    }

    std::size_t remaining() const { return data_.size() - pos_; }

    void expect_end() const {
        if (pos_ != data_.size())
            throw ParseError("trailing bytes after structure (" + std::to_string(remaining()) + ")");
    }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) throw ParseError("truncated input");
    }

    std::span<const uint8_t> data_;
    std::size_t pos_ = 0;
};

/// Appends values of `bits` bits each, LSB-first within the growing bit stream.
class BitPacker {
public:
    void push(uint64_t value, unsigned bits) {
        for (unsigned i = 0; i < bits; ++i) {
            if (bitpos_ == 0) bytes_.push_back(0);
            if ((value >> i) & 1) bytes_.back() |= static_cast<uint8_t>(1u << bitpos_);
            bitpos_ = (bitpos_ + 1) % 8;
        }
    }

    /// Pads the final partial byte with zero bits and returns the buffer.
    const std::vector<uint8_t>& bytes() const { return bytes_; }

private:
    std::vector<uint8_t> bytes_;
    unsigned bitpos_ = 0;
};

/// Reads back values written by BitPacker.
class BitUnpacker {
public:
    explicit BitUnpacker(std::span<const uint8_t> bytes) : bytes_(bytes) {}

    uint64_t pull(unsigned bits) {
        uint64_t v = 0;
        for (unsigned i = 0; i < bits; ++i) {
            const std::size_t byte = pos_ / 8;
            if (byte >= bytes_.size()) throw ParseError("truncated bit-packed field element");
            if ((bytes_[byte] >> (pos_ % 8)) & 1) v |= uint64_t{1} << i;
            ++pos_;
        }
        return v;
    }

private:
    std::span<const uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace straggler
