#pragma once

#include <stdexcept>
#include <string>

namespace escapedim {

// Every failure raised by the library derives from Error so callers (the CLI in
// particular) can map families of failures onto exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define ESCAPEDIM_DEFINE_ERROR(Name)                          \
    class Name : public Error {                               \
    public:                                                   \
        explicit Name(const std::string& what) : Error(what) {} \
    }

ESCAPEDIM_DEFINE_ERROR(InvalidArgument);
ESCAPEDIM_DEFINE_ERROR(LatticePointSingularity);
ESCAPEDIM_DEFINE_ERROR(PoleOfG);
ESCAPEDIM_DEFINE_ERROR(PoleOfH);
ESCAPEDIM_DEFINE_ERROR(PoleOfF);
ESCAPEDIM_DEFINE_ERROR(RegionTooLarge);
ESCAPEDIM_DEFINE_ERROR(InjectivityCheckFailed);
ESCAPEDIM_DEFINE_ERROR(OutOfDomain);
ESCAPEDIM_DEFINE_ERROR(AccuracyNotMet);
ESCAPEDIM_DEFINE_ERROR(HypothesisFailed);
ESCAPEDIM_DEFINE_ERROR(RootPolishFailed);
ESCAPEDIM_DEFINE_ERROR(ModulusOnePole);
ESCAPEDIM_DEFINE_ERROR(PoleAtOrigin);
ESCAPEDIM_DEFINE_ERROR(InsufficientBlocks);
ESCAPEDIM_DEFINE_ERROR(NonMonotone);
ESCAPEDIM_DEFINE_ERROR(EvaluationRangeExceeded);
ESCAPEDIM_DEFINE_ERROR(IncompatibleRanges);
ESCAPEDIM_DEFINE_ERROR(HypothesisViolated);
ESCAPEDIM_DEFINE_ERROR(PreconditionRadius);

#undef ESCAPEDIM_DEFINE_ERROR

}  // namespace escapedim
