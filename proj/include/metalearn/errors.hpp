// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace metalearn {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes incompatible with an op.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A caller violated a precondition (non-scalar backward output, asymmetric matrix, ...).
class ContractError : public Error {
public:
    using Error::Error;
};

/// A tensor is not recorded on the tape it is being differentiated against.
class ProvenanceError : public Error {
public:
    using Error::Error;
};

/// The tape cannot provide the requested differentiation order.
class CapabilityError : public Error {
public:
    using Error::Error;
};

/// Malformed task data (labels out of range, mismatched row counts, bad fixture bytes).
class DataError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// A meta-gradient engine was handed a trace produced by the wrong inner optimizer.
class MethodMismatchError : public Error {
public:
    using Error::Error;
};

/// Non-finite loss or gradient during inner-loop adaptation.
class DivergenceError : public Error {
public:
    DivergenceError(std::size_t step, const std::string& what)
        : Error("diverged at inner step " + std::to_string(step) + ": " + what), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// A meta-step aborted because one task of the episode diverged.
class TaskDivergenceError : public Error {
public:
    TaskDivergenceError(std::size_t task_index, const DivergenceError& cause)
        : Error("task " + std::to_string(task_index) + " " + cause.what()),
          task_index_(task_index),
          step_(cause.step()) {}

    std::size_t task_index() const noexcept { return task_index_; }
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t task_index_;
    std::size_t step_;
};

}  // namespace metalearn
