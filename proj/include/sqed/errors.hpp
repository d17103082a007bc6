#pragma once

#include <stdexcept>
#include <string>

namespace sqed {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define SQED_DEFINE_ERROR(Name)                                   \
    struct Name : Error {                                          \
        explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
    }

SQED_DEFINE_ERROR(DimensionMismatch);
SQED_DEFINE_ERROR(NonSymplectic);
SQED_DEFINE_ERROR(CutoffTooSmall);
SQED_DEFINE_ERROR(OracleTooLarge);
SQED_DEFINE_ERROR(ZeroNorm);
SQED_DEFINE_ERROR(QuadratureNotConverged);
SQED_DEFINE_ERROR(PoleProximity);
SQED_DEFINE_ERROR(ExpansionUnstable);
SQED_DEFINE_ERROR(InvalidWindow);
SQED_DEFINE_ERROR(ConfigError);

#undef SQED_DEFINE_ERROR

}  // namespace sqed
