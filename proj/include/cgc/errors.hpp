#pragma once

#include <stdexcept>
#include <string>

namespace cgc {

// Shape/dimension violations on matrix and tensor operations.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or inconsistent dataset files.
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

struct EmptyDatasetError : std::runtime_error {
    explicit EmptyDatasetError(const std::string& what) : std::runtime_error(what) {}
};

// Bad experiment configuration (unknown key, out-of-range value).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values during optimization.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Cross-validation fold whose training split has fewer than two classes.
struct DegenerateFoldError : std::runtime_error {
    explicit DegenerateFoldError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace cgc
