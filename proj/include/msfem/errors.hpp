#pragma once

#include <stdexcept>
#include <string>

namespace msfem {

/// Bad input to a library call (out-of-range index, inconsistent sizes, ...).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A mesh or system could not be assembled (degenerate element, etc.).
class AssemblyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Coefficient field failed the sampled ellipticity check.
class EllipticityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Error raised while building the local problem of one coarse element.
class ElementError : public std::runtime_error {
public:
    ElementError(std::size_t element, const std::string& what)
        : std::runtime_error("element " + std::to_string(element) + ": " + what),
          element_(element) {}

    std::size_t element() const noexcept { return element_; }

private:
    std::size_t element_;
};

}  // namespace msfem
