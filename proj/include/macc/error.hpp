#pragma once

#include <stdexcept>
#include <string>

namespace macc {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand extents do not satisfy an operation's contract.
class ShapeError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// A training loop produced a non-finite loss.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, int epoch) : Error(what), epoch_(epoch) {}
    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

/// A pipeline stage was invoked before the stage that produces its input.
class MissingArtifactError : public Error {
public:
    using Error::Error;
};

}  // namespace macc
