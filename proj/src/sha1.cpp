#include "p2p/sha1.hpp"

#include <cstring>

#include "p2p/errors.hpp"

namespace p2p {

namespace {

inline std::uint32_t rol(std::uint32_t v, int n) { return (v << n) | (v >> (32 - n)); }

} // namespace

void Sha1::reset() {
    h_[0] = 0x67452301u;
    h_[1] = 0xefcdab89u;
    h_[2] = 0x98badcfeu;
    h_[3] = 0x10325476u;
    h_[4] = 0xc3d2e1f0u;
    total_bytes_ = 0;
    buffered_ = 0;
}

void Sha1::process_block(const std::uint8_t* block) {
    std::uint32_t w[80];
    for (int i = 0; i < 16; ++i) {
        w[i] = (std::uint32_t(block[i * 4]) << 24) | (std::uint32_t(block[i * 4 + 1]) << 16) |
               (std::uint32_t(block[i * 4 + 2]) << 8) | std::uint32_t(block[i * 4 + 3]);
    }
    for (int i = 16; i < 80; ++i)
        w[i] = rol(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);

    std::uint32_t a = h_[0], b = h_[1], c = h_[2], d = h_[3], e = h_[4];
    for (int i = 0; i < 80; ++i) {
        std::uint32_t f, k;
        if (i < 20) {
            f = (b & c) | ((~b) & d);
            k = 0x5a827999u;
        } else if (i < 40) {
            f = b ^ c ^ d;
            k = 0x6ed9eba1u;
        } else if (i < 60) {
            f = (b & c) | (b & d) | (c & d);
            k = 0x8f1bbcdcu;
        } else {
            f = b ^ c ^ d;
            k = 0xca62c1d6u;
        }
        const std::uint32_t temp = rol(a, 5) + f + e + k + w[i];
        e = d;
        d = c;
        c = rol(b, 30);
        b = a;
        a = temp;
    }
    h_[0] += a;
    h_[1] += b;
    h_[2] += c;
    h_[3] += d;
    h_[4] += e;
}

void Sha1::update(std::span<const std::uint8_t> data) {
    total_bytes_ += data.size();
    std::size_t offset = 0;
    if (buffered_ > 0) {
        const std::size_t take = std::min(data.size(), std::size_t(64) - buffered_);
        std::memcpy(buffer_ + buffered_, data.data(), take);
        buffered_ += take;
        offset += take;
        if (buffered_ == 64) {
            process_block(buffer_);
            buffered_ = 0;
        }
    }
    while (offset + 64 <= data.size()) {
        process_block(data.data() + offset);
        offset += 64;
    }
    if (offset < data.size()) {
        std::memcpy(buffer_, data.data() + offset, data.size() - offset);
        buffered_ = data.size() - offset;
    }
}

Digest Sha1::finish() {
    const std::uint64_t bit_len = total_bytes_ * 8;
    const std::uint8_t pad = 0x80;
    update(std::span<const std::uint8_t>(&pad, 1));
    const std::uint8_t zero = 0x00;
    while (buffered_ != 56)
        update(std::span<const std::uint8_t>(&zero, 1));
    std::uint8_t len_bytes[8];
    for (int i = 0; i < 8; ++i)
        len_bytes[i] = std::uint8_t(bit_len >> (56 - 8 * i));
    update(std::span<const std::uint8_t>(len_bytes, 8));

    Digest out;
    for (int i = 0; i < 5; ++i) {
        out[i * 4] = std::uint8_t(h_[i] >> 24);
        out[i * 4 + 1] = std::uint8_t(h_[i] >> 16);
        out[i * 4 + 2] = std::uint8_t(h_[i] >> 8);
        out[i * 4 + 3] = std::uint8_t(h_[i]);
    }
    reset();
    return out;
}

std::string to_hex(const Digest& d) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    s.reserve(40);
    for (std::uint8_t byte : d) {
        s.push_back(digits[byte >> 4]);
        s.push_back(digits[byte & 0xf]);
    }
    return s;
}

Digest digest_from_hex(std::string_view hex) {
    if (hex.size() != 40)
        throw InvalidParams("digest_from_hex: expected 40 hex chars");
    auto nibble = [](char c) -> std::uint8_t {
        if (c >= '0' && c <= '9')
            return std::uint8_t(c - '0');
        if (c >= 'a' && c <= 'f')
            return std::uint8_t(c - 'a' + 10);
        if (c >= 'A' && c <= 'F')
            return std::uint8_t(c - 'A' + 10);
        throw InvalidParams("digest_from_hex: bad hex char");
    };
    Digest d;
    for (std::size_t i = 0; i < 20; ++i)
        d[i] = std::uint8_t(nibble(hex[2 * i]) << 4) | nibble(hex[2 * i + 1]);
    return d;
}

std::uint64_t digest_tail_u64(const Digest& d) {
    std::uint64_t v = 0;
    for (std::size_t i = 12; i < 20; ++i)
        v = (v << 8) | d[i];
    return v;
}

} // namespace p2p
