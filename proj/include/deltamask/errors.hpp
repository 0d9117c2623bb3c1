#pragma once

#include <stdexcept>
#include <string>

namespace deltamask {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// filter construction / serialization
struct ConstructionFailed : Error {
    using Error::Error;
};
struct DuplicateKeys : Error {
    using Error::Error;
};
struct MalformedHeader : Error {
    using Error::Error;
};
struct VersionMismatch : Error {
    using Error::Error;
};
struct TruncatedPayload : Error {
    using Error::Error;
};
struct DecompressFailure : Error {
    using Error::Error;
};

// mask / codec
struct LengthMismatch : Error {
    using Error::Error;
};
struct IndexOutOfRange : Error {
    using Error::Error;
};

// model / data
struct InvalidSpec : Error {
    using Error::Error;
};
struct ShapeMismatch : Error {
    using Error::Error;
};
struct EmptyDataset : Error {
    using Error::Error;
};
struct TooFewSamples : Error {
    using Error::Error;
};

// aggregation
struct EmptyClientSet : Error {
    using Error::Error;
};

// cli / config; message always names the offending key
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace deltamask
