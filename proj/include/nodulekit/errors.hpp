#pragma once

#include <stdexcept>
#include <string>

namespace nodulekit {

// Base for all pipeline errors. The CLI maps these to exit code 2 (data
// errors); anything else that escapes is an internal error (exit 3).
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define NODULEKIT_DEFINE_ERROR(NAME)                                   \
    struct NAME : Error {                                              \
        explicit NAME(const std::string& msg = #NAME) : Error(msg) {}  \
    }

// Raw volume / container formats
NODULEKIT_DEFINE_ERROR(MalformedHeader);
NODULEKIT_DEFINE_ERROR(PayloadSizeMismatch);
NODULEKIT_DEFINE_ERROR(UnsupportedDType);
NODULEKIT_DEFINE_ERROR(BadMagic);
NODULEKIT_DEFINE_ERROR(TruncatedPayload);
NODULEKIT_DEFINE_ERROR(VersionUnsupported);
NODULEKIT_DEFINE_ERROR(IoError);

// Annotation XML
NODULEKIT_DEFINE_ERROR(XmlSyntaxError);
NODULEKIT_DEFINE_ERROR(RatingOutOfRange);
NODULEKIT_DEFINE_ERROR(EmptyPolygon);

// Masks / geometry
NODULEKIT_DEFINE_ERROR(EmptyMask);
NODULEKIT_DEFINE_ERROR(CenterOutOfBounds);
NODULEKIT_DEFINE_ERROR(SeedOutOfBounds);
NODULEKIT_DEFINE_ERROR(DegenerateRange);

// Models
NODULEKIT_DEFINE_ERROR(UnknownArchitecture);
NODULEKIT_DEFINE_ERROR(ShapeMismatch);
NODULEKIT_DEFINE_ERROR(SingleClassTrainingSet);
NODULEKIT_DEFINE_ERROR(LengthMismatch);

// Evaluation
NODULEKIT_DEFINE_ERROR(SingleClass);
NODULEKIT_DEFINE_ERROR(TooFewPatients);
NODULEKIT_DEFINE_ERROR(EmptyClass);

#undef NODULEKIT_DEFINE_ERROR

}  // namespace nodulekit
