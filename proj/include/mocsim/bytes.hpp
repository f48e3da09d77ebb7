#ifndef MOCSIM_BYTES_H
#define MOCSIM_BYTES_H

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace mocsim {

/*
 * Big-endian byte stream helpers shared by the wire codec and the taxonomy
 * table format.  All multi-byte integers on the wire are network order.
 */

// thrown on malformed input; carries the byte offset where decoding failed
class decode_error : public std::runtime_error {
public:
    decode_error(size_t offset, const std::string& what)
        : std::runtime_error("decode error at byte " + std::to_string(offset) + ": " + what),
          offset_(offset) {}
    size_t offset() const { return offset_; }

private:
    size_t offset_;
};

class ByteWriter {
public:
    void put_u8(uint8_t v) { buf_.push_back(v); }
    void put_u16(uint16_t v) {
        buf_.push_back(static_cast<uint8_t>(v >> 8));
        buf_.push_back(static_cast<uint8_t>(v));
    }
    void put_u32(uint32_t v) {
        for (int s = 24; s >= 0; s -= 8) buf_.push_back(static_cast<uint8_t>(v >> s));
    }
    void put_u64(uint64_t v) {
        for (int s = 56; s >= 0; s -= 8) buf_.push_back(static_cast<uint8_t>(v >> s));
    }
    void put_f64(double v) {
        uint64_t bits;
        std::memcpy(&bits, &v, 8);
        put_u64(bits);
    }
    // u16 length prefix + UTF-8 bytes
    void put_string(const std::string& s) {
        if (s.size() > UINT16_MAX) throw std::invalid_argument("string too long for wire");
        put_u16(static_cast<uint16_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }
    void put_bytes(const uint8_t* p, size_t n) { buf_.insert(buf_.end(), p, p + n); }
    void put_zeros(size_t n) { buf_.resize(buf_.size() + n, 0); }

    const std::vector<uint8_t>& data() const { return buf_; }
    std::vector<uint8_t> take() { return std::move(buf_); }
    size_t size() const { return buf_.size(); }

private:
    std::vector<uint8_t> buf_;
};

class ByteReader {
public:
    ByteReader(const uint8_t* data, size_t size) : data_(data), size_(size) {}
    explicit ByteReader(const std::vector<uint8_t>& v) : data_(v.data()), size_(v.size()) {}

    uint8_t get_u8() {
        need(1);
        return data_[pos_++];
    }
    uint16_t get_u16() {
        need(2);
        uint16_t v = static_cast<uint16_t>((data_[pos_] << 8) | data_[pos_ + 1]);
        pos_ += 2;
        return v;
    }
    uint32_t get_u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | data_[pos_ + i];
        pos_ += 4;
        return v;
    }
    uint64_t get_u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v = (v << 8) | data_[pos_ + i];
        pos_ += 8;
        return v;
    }
    double get_f64() {
        uint64_t bits = get_u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string get_string() {
        uint16_t n = get_u16();
        need(n);
        std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
        pos_ += n;
        return s;
    }
    void skip(size_t n) {
        need(n);
        pos_ += n;
    }

    size_t pos() const { return pos_; }
    size_t remaining() const { return size_ - pos_; }
    bool at_end() const { return pos_ == size_; }

private:
    void need(size_t n) const {
        if (size_ - pos_ < n) throw decode_error(pos_, "truncated input");
    }
    const uint8_t* data_;
    size_t size_;
    size_t pos_ = 0;
};

} // namespace mocsim

#endif // MOCSIM_BYTES_H
