#pragma once

#include <stdexcept>
#include <string>

namespace mimo {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A caller violated a documented precondition (dimension mismatch,
/// out-of-range argument, unsupported enum value).
class ContractError : public Error {
public:
    explicit ContractError(const std::string& what) : Error(what) {}
};

/// A matrix required to be invertible was (numerically) singular.
/// Carries the magnitude of the smallest pivot / singular value seen.
class SingularityError : public Error {
public:
    SingularityError(const std::string& what, double smallest_pivot)
        : Error(what + " (smallest pivot " + std::to_string(smallest_pivot) + ")"),
          smallest_pivot_(smallest_pivot) {}

    double smallest_pivot() const noexcept { return smallest_pivot_; }

private:
    double smallest_pivot_;
};

/// An iterative detector left its stability envelope.
class DivergenceError : public Error {
public:
    explicit DivergenceError(const std::string& what) : Error(what) {}
};

/// A file did not match the expected on-disk format. Carries the byte
/// offset at which parsing failed.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::uint64_t byte_offset)
        : Error(what + " (at byte offset " + std::to_string(byte_offset) + ")"),
          byte_offset_(byte_offset) {}

    std::uint64_t byte_offset() const noexcept { return byte_offset_; }

private:
    std::uint64_t byte_offset_;
};

/// A requested computation exceeds a configured budget.
class CapacityError : public Error {
public:
    explicit CapacityError(const std::string& what) : Error(what) {}
};

/// A non-finite value appeared where the math requires finite ones.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(what) {}
};

/// A lookup or interpolation target lies outside the covered range.
class RangeError : public Error {
public:
    explicit RangeError(const std::string& what) : Error(what) {}
};

/// A statistic cannot be formed from the given sample (e.g. zero variance).
class DegenerateSampleError : public Error {
public:
    explicit DegenerateSampleError(const std::string& what) : Error(what) {}
};

} // namespace mimo
