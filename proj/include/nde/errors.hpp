#pragma once

#include <stdexcept>
#include <string>

namespace nde {

/// Base of every error thrown by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ChannelMismatchError : public Error { using Error::Error; };
class DomainError : public Error { using Error::Error; };
class BoundsError : public Error { using Error::Error; };
class ShapeError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class ManifestError : public Error { using Error::Error; };
class SplitError : public Error { using Error::Error; };
class CheckpointError : public Error { using Error::Error; };
class TrainingError : public Error { using Error::Error; };
class LayoutError : public Error { using Error::Error; };

/// Failure of one cascade stage; carries the zero-based stage index.
class StageError : public Error {
public:
    StageError(std::size_t stage, const std::string& what)
        : Error("stage " + std::to_string(stage) + ": " + what), stage_(stage) {}
    std::size_t stage() const noexcept { return stage_; }

private:
    std::size_t stage_;
};

}  // namespace nde
