#pragma once

#include <stdexcept>
#include <string>

namespace laminhom {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    /// Short machine-readable kind, used on the CLI error line.
    virtual const char* kind() const noexcept { return "Error"; }
};

#define LAMINHOM_DEFINE_ERROR(Name)                                   \
    class Name : public Error {                                       \
    public:                                                           \
        using Error::Error;                                           \
        const char* kind() const noexcept override { return #Name; }  \
    }

/// Deformation outside the admissible set (det F <= 0, or outside the
/// configured neighborhood of SO(d)).
LAMINHOM_DEFINE_ERROR(DomainError);
LAMINHOM_DEFINE_ERROR(ConvergenceError);
LAMINHOM_DEFINE_ERROR(SingularityError);
LAMINHOM_DEFINE_ERROR(PeriodizationError);
LAMINHOM_DEFINE_ERROR(SpectrumError);
LAMINHOM_DEFINE_ERROR(EnsembleError);
LAMINHOM_DEFINE_ERROR(DegenerateFitError);
LAMINHOM_DEFINE_ERROR(ConfigError);

#undef LAMINHOM_DEFINE_ERROR

}  // namespace laminhom
