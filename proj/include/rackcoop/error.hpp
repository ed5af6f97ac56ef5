#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace rackcoop {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad user input: parameters, flags, message sizes. CLI exit code 1.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Corrupted on-disk data, failed construction-time verification, or a
// violated runtime assertion. CLI exit code 2.
class IntegrityError : public Error {
public:
    using Error::Error;
};

class FieldError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class SingularMatrixError : public Error {
public:
    using Error::Error;
};

}  // namespace rackcoop
