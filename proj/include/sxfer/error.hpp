#pragma once

#include <stdexcept>
#include <string>

namespace sxfer {

// Every failure raised by the library derives from Error so callers (the CLI
// in particular) can map the category to an exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Wavelength or parameter outside a supported/tabulated range.
class RangeError : public Error {
public:
    using Error::Error;
};

// Non-finite intermediate values, recursion blow-ups, overflow.
class NumericalError : public Error {
public:
    using Error::Error;
};

// Lengths or widths that do not line up.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Malformed files: bad header, truncated rows, version mismatch, checksum failure.
class FormatError : public Error {
public:
    using Error::Error;
};

// Semantically invalid content in an otherwise well-formed file.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Invalid architecture or experiment configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Architecture fingerprints that do not match for a transfer.
class CompatibilityError : public Error {
public:
    using Error::Error;
};

// Training diverged (loss became non-finite).
class TrainingError : public Error {
public:
    using Error::Error;
};

// Unknown key, e.g. a task id that is not registered.
class LookupError : public Error {
public:
    using Error::Error;
};

}  // namespace sxfer
