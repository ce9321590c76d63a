#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "json.hpp"

namespace ldg {

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <typename U>
void put_le(std::string& out, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <typename U>
U get_le(const char* p) {
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
}

/// Magic line, one JSON line, then raw payload.
struct Framed {
    nlohmann::json header;
    std::string_view payload;
};

/// Throws FormatError on a wrong magic or a malformed JSON line.
Framed split_frame(const std::string& bytes, std::string_view magic);

/// Throws FormatError ("truncated payload" / "payload size mismatch") unless have == want.
void check_payload(std::size_t have, std::size_t want);

}  // namespace ldg
