#pragma once

#include <stdexcept>
#include <string>

namespace semand {

// Every library failure derives from Error; kind() is the machine-readable tag
// the CLI prints on its error line.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define SEMAND_DEFINE_ERROR(Name, tag)                                       \
    class Name : public Error {                                              \
    public:                                                                  \
        explicit Name(const std::string& what) : Error(tag, what) {}         \
    };

SEMAND_DEFINE_ERROR(DomainError, "domain")
SEMAND_DEFINE_ERROR(DegenerateGeometryError, "degenerate_geometry")
SEMAND_DEFINE_ERROR(AlignmentError, "alignment")
SEMAND_DEFINE_ERROR(DataError, "data")
SEMAND_DEFINE_ERROR(EmptyTileError, "empty_tile")
SEMAND_DEFINE_ERROR(UndefinedPosednessError, "undefined_posedness")
SEMAND_DEFINE_ERROR(RejectionExhaustedError, "rejection_exhausted")
SEMAND_DEFINE_ERROR(NormalizationError, "normalization")
SEMAND_DEFINE_ERROR(ConfigError, "config")
SEMAND_DEFINE_ERROR(CheckpointError, "checkpoint")
SEMAND_DEFINE_ERROR(TrainingError, "training")
SEMAND_DEFINE_ERROR(InsufficientDataError, "insufficient_data")
SEMAND_DEFINE_ERROR(EvaluationError, "evaluation")
SEMAND_DEFINE_ERROR(IoError, "io")

#undef SEMAND_DEFINE_ERROR

} // namespace semand
