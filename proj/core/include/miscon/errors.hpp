#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace miscon {

/// Base class for all engine errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad inputs: malformed files, invalid configuration, violated preconditions.
/// The CLI maps these to exit code 1.
class InputError : public Error {
public:
    using Error::Error;
};

/// Backend trouble: transport failures, missing fixture entries, unusable
/// model output. The CLI maps these to exit code 2.
class BackendError : public Error {
public:
    using Error::Error;
};

/// A pipeline stage failure carrying the stage name and the instance it hit.
class StageError : public Error {
public:
    StageError(std::string stage, std::string instance_id, const std::string& cause,
               bool backend_fault)
        : Error("stage '" + stage + "' failed for instance '" + instance_id + "': " + cause),
          stage_(std::move(stage)),
          instance_id_(std::move(instance_id)),
          backend_fault_(backend_fault) {}

    const std::string& stage() const noexcept { return stage_; }
    const std::string& instance_id() const noexcept { return instance_id_; }
    bool backend_fault() const noexcept { return backend_fault_; }

private:
    std::string stage_;
    std::string instance_id_;
    bool backend_fault_;
};

}  // namespace miscon
