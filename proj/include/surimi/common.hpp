#ifndef SURIMI_COMMON_HPP
#define SURIMI_COMMON_HPP

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>

namespace surimi {

inline constexpr const char* kVersion = "0.1.0";

// Error hierarchy. The CLI maps each category to a stable exit code.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad column layout, bad schema/config document, invalid run configuration.
class SchemaError : public Error {
public:
    using Error::Error;
};

// Malformed cell content; carries row/column context in the message.
class ParseError : public Error {
public:
    using Error::Error;
};

// Precondition violation on values (out-of-range index, non-finite label, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// Tensor/layer dimension mismatch.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Operation applied to an object in the wrong state (e.g. powed twice).
class InvalidStateError : public Error {
public:
    using Error::Error;
};

// Non-finite loss or other numeric breakdown during training.
class NumericError : public Error {
public:
    using Error::Error;
};

// Artifacts that do not belong together (mixed test splits, ...).
class ProvenanceError : public Error {
public:
    using Error::Error;
};

inline void log_warn(const std::string& msg) {
    std::fprintf(stderr, "[surimi] warning: %s\n", msg.c_str());
}

inline void log_info(const std::string& msg) {
    std::fprintf(stderr, "[surimi] %s\n", msg.c_str());
}

// FNV-1a, used for parameter-blob checksums and config/dataset fingerprints.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t seed = 1469598103934665603ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::string_view s,
                             std::uint64_t seed = 1469598103934665603ull) {
    return fnv1a64(s.data(), s.size(), seed);
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

}  // namespace surimi

#endif
