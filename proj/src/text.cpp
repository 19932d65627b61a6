#include "specfsm/text.hpp"

#include "specfsm/error.hpp"

#include <openssl/evp.h>

#include <cctype>
#include <memory>

namespace specfsm {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::EmptyAfterClean: return "EmptyAfterClean";
        case ErrorKind::NoSectionsFound: return "NoSectionsFound";
        case ErrorKind::InvalidState: return "InvalidState";
        case ErrorKind::AmbiguousSubstate: return "AmbiguousSubstate";
        case ErrorKind::PseudoState: return "PseudoState";
        case ErrorKind::EmptyCatalog: return "EmptyCatalog";
        case ErrorKind::ProviderUnavailable: return "ProviderUnavailable";
        case ErrorKind::AuthFailure: return "AuthFailure";
        case ErrorKind::Timeout: return "Timeout";
        case ErrorKind::FixtureMiss: return "FixtureMiss";
        case ErrorKind::Schema: return "SchemaError";
        case ErrorKind::Config: return "ConfigError";
        case ErrorKind::Template: return "TemplateError";
        case ErrorKind::Io: return "IoError";
    }
    return "Error";
}

namespace text {

bool is_space(char c) noexcept {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string_view trim(std::string_view s) noexcept {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return s.substr(b, e - b);
}

std::vector<std::string_view> split_words(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(s[i])) ++i;
        std::size_t start = i;
        while (i < s.size() && !is_space(s[i])) ++i;
        if (i > start) out.push_back(s.substr(start, i - start));
    }
    return out;
}

std::size_t word_count(std::string_view s) noexcept {
    std::size_t n = 0;
    bool in_word = false;
    for (char c : s) {
        if (is_space(c)) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++n;
        }
    }
    return n;
}

std::string normalize_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (auto w : split_words(s)) {
        if (!out.empty()) out.push_back(' ');
        out.append(w);
    }
    return out;
}

bool contains_normalized(std::string_view haystack, std::string_view needle) {
    const std::string n = normalize_whitespace(needle);
    if (n.empty()) return true;
    return normalize_whitespace(haystack).find(n) != std::string::npos;
}

std::string to_upper_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string truncate_words(std::string_view s, std::size_t max_words) {
    std::string out;
    std::size_t n = 0;
    for (auto w : split_words(s)) {
        if (n == max_words) break;
        if (!out.empty()) out.push_back(' ');
        out.append(w);
        ++n;
    }
    return out;
}

std::vector<std::string_view> split_lines(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start < s.size()) {
        std::size_t nl = s.find('\n', start);
        if (nl == std::string_view::npos) {
            out.push_back(s.substr(start));
            break;
        }
        out.push_back(s.substr(start, nl - start));
        start = nl + 1;
    }
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.append(sep);
        out.append(parts[i]);
    }
    return out;
}

std::string sha256_hex(std::string_view data) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
        throw Error(ErrorKind::Io, "sha256 digest failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0x0f]);
    }
    return out;
}

}  // namespace text
}  // namespace specfsm
