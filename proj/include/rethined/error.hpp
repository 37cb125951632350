#pragma once

#include <stdexcept>
#include <string>

namespace rethined {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Extents or channel counts that do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

// A value outside the operation's domain (sigma <= 0, NaN input, non-binary mask, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// Malformed or unsupported file content.
class FormatError : public Error {
public:
    using Error::Error;
};

// Operation not valid in the object's current state (e.g. fusing a fused block).
class StateError : public Error {
public:
    using Error::Error;
};

}  // namespace rethined
