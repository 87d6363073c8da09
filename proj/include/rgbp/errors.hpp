#pragma once

#include <stdexcept>
#include <string>

namespace rgbp {

// Incompatible or indivisible tensor/plane dimensions.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Input values violate a documented range or finiteness requirement.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed serialized container (bad magic, truncation, overflow).
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Mosaic pattern does not match the requested operation.
class PatternError : public std::runtime_error {
public:
    explicit PatternError(const std::string& msg) : std::runtime_error(msg) {}
};

// Synthetic scene generator could not place the requested boxes.
class PlacementError : public std::runtime_error {
public:
    explicit PlacementError(const std::string& msg) : std::runtime_error(msg) {}
};

// Missing file or unknown id.
class NotFoundError : public std::runtime_error {
public:
    explicit NotFoundError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace rgbp
