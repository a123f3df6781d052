#pragma once

#include <stdexcept>
#include <string>

namespace cvfusion {

// Every failure raised by the library derives from Error so callers can
// catch broadly and still dispatch on the concrete kind.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FormatError : public Error { public: using Error::Error; };
class TooShortError : public Error { public: using Error::Error; };
class SchemaError : public Error { public: using Error::Error; };
class MissingFileError : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };
class ParamError : public Error { public: using Error::Error; };
class DataError : public Error { public: using Error::Error; };
class SpecError : public Error { public: using Error::Error; };
class TrainError : public Error { public: using Error::Error; };
class VersionError : public Error { public: using Error::Error; };

// Raised when a statistic is mathematically undefined (e.g. zero
// within-group variance in a one-way ANOVA).
class DegenerateError : public Error { public: using Error::Error; };

}  // namespace cvfusion
