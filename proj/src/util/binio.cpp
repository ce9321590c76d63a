#include "ldg/util/binio.hpp"

namespace ldg {

Framed split_frame(const std::string& bytes, std::string_view magic) {
    if (bytes.compare(0, magic.size(), magic) != 0) {
        throw FormatError("bad magic: expected " + std::string(magic.substr(0, magic.size() - 1)));
    }
    const auto eol = bytes.find('\n', magic.size());
    if (eol == std::string::npos) throw FormatError("truncated header: missing newline after JSON line");
    Framed f;
    try {
        f.header = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(magic.size()),
                                         bytes.begin() + static_cast<std::ptrdiff_t>(eol));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed header JSON: ") + e.what());
    }
    f.payload = std::string_view(bytes).substr(eol + 1);
    return f;
}

void check_payload(std::size_t have, std::size_t want) {
    if (have < want) {
        throw FormatError("truncated payload: " + std::to_string(have) + " bytes, header declares " +
                          std::to_string(want));
    }
    if (have > want) {
        throw FormatError("payload size mismatch: " + std::to_string(have) + " bytes, header declares " +
                          std::to_string(want));
    }
}

}  // namespace ldg
