#pragma once

#include <stdexcept>
#include <string>

namespace retfuse {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MissingFile : Error { using Error::Error; };
struct SchemaError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

struct UnknownLabel : Error { using Error::Error; };
struct EmptySplit : Error { using Error::Error; };
struct InvalidRatios : Error { using Error::Error; };
struct DecodeError : Error { using Error::Error; };

struct ShapeError : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct AllModalitiesAbsent : Error { using Error::Error; };
struct MissingModality : Error { using Error::Error; };
struct NonFiniteInput : Error { using Error::Error; };

struct NotNormalized : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct EmptyMask : Error { using Error::Error; };
struct LabelOutOfRange : Error { using Error::Error; };
struct NonFiniteComponent : Error { using Error::Error; };
struct LengthOverflow : Error { using Error::Error; };

struct NonFiniteLoss : Error { using Error::Error; };
struct EmptyDataset : Error { using Error::Error; };
struct IncompatibleConfig : Error { using Error::Error; };
struct KOutOfRange : Error { using Error::Error; };

} // namespace retfuse
