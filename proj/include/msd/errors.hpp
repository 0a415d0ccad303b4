#pragma once

#include <stdexcept>
#include <string>

namespace msd {

// Base for all library errors. Subclasses carry a stable machine-readable
// code string used by the CLI for exit-code mapping.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(code + ": " + what), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

#define MSD_DEFINE_ERROR(Name)                              \
    class Name : public Error {                             \
    public:                                                 \
        explicit Name(const std::string& what)              \
            : Error(#Name, what) {}                         \
    }

MSD_DEFINE_ERROR(DegeneratePose);
MSD_DEFINE_ERROR(DegenerateRotation);
MSD_DEFINE_ERROR(InvalidFactor);
MSD_DEFINE_ERROR(InvalidSkeleton);
MSD_DEFINE_ERROR(InvalidMotion);
MSD_DEFINE_ERROR(UnknownTemplate);
MSD_DEFINE_ERROR(IOFailure);
MSD_DEFINE_ERROR(EmptyText);
MSD_DEFINE_ERROR(DimensionMismatch);
MSD_DEFINE_ERROR(ShapeMismatch);
MSD_DEFINE_ERROR(NonScalarLoss);
MSD_DEFINE_ERROR(InvalidSchedule);
MSD_DEFINE_ERROR(NotOnDdimGrid);
MSD_DEFINE_ERROR(EmptyDataset);
MSD_DEFINE_ERROR(DivergedTraining);
MSD_DEFINE_ERROR(PromptRewriteFailed);
MSD_DEFINE_ERROR(MissingStyleVocabulary);
MSD_DEFINE_ERROR(ZeroVelocityContent);
MSD_DEFINE_ERROR(EmptyInput);
MSD_DEFINE_ERROR(LengthMismatch);
MSD_DEFINE_ERROR(MatrixSqrtFailure);
MSD_DEFINE_ERROR(NoCandidates);
MSD_DEFINE_ERROR(ConfigInvalid);
MSD_DEFINE_ERROR(MissingArtifact);

#undef MSD_DEFINE_ERROR

}  // namespace msd
