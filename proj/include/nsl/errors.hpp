#ifndef NSL_ERRORS_HPP
#define NSL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace nsl {

// Coarse failure categories; the CLI maps these onto process exit codes.
enum class ErrorKind {
    Validation,  // bad arguments or configuration
    Data,        // malformed or inconsistent input files
    Numeric,     // singular matrices, non-finite values
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string name, const std::string& what)
        : std::runtime_error(name + ": " + what), kind_(kind), name_(std::move(name)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& name() const noexcept { return name_; }

private:
    ErrorKind kind_;
    std::string name_;
};

struct SingularRow : Error {
    explicit SingularRow(const std::string& what)
        : Error(ErrorKind::Numeric, "SingularRow", what) {}
};

struct InvalidEpsilon : Error {
    explicit InvalidEpsilon(const std::string& what)
        : Error(ErrorKind::Validation, "InvalidEpsilon", what) {}
};

struct EmptyBatch : Error {
    explicit EmptyBatch(const std::string& what)
        : Error(ErrorKind::Validation, "EmptyBatch", what) {}
};

struct ShapeMismatch : Error {
    explicit ShapeMismatch(const std::string& what)
        : Error(ErrorKind::Validation, "ShapeMismatch", what) {}
};

struct EmptyDataset : Error {
    explicit EmptyDataset(const std::string& what)
        : Error(ErrorKind::Data, "EmptyDataset", what) {}
};

struct NonFiniteLoss : Error {
    explicit NonFiniteLoss(const std::string& what)
        : Error(ErrorKind::Numeric, "NonFiniteLoss", what) {}
};

struct MissingColumn : Error {
    explicit MissingColumn(const std::string& what)
        : Error(ErrorKind::Data, "MissingColumn", what) {}
};

struct DuplicateSpotId : Error {
    explicit DuplicateSpotId(const std::string& what)
        : Error(ErrorKind::Data, "DuplicateSpotId", what) {}
};

struct MalformedRow : Error {
    explicit MalformedRow(const std::string& what)
        : Error(ErrorKind::Data, "MalformedRow", what) {}
};

struct NoOverlap : Error {
    explicit NoOverlap(const std::string& what)
        : Error(ErrorKind::Data, "NoOverlap", what) {}
};

struct RaggedRow : Error {
    explicit RaggedRow(const std::string& what)
        : Error(ErrorKind::Data, "RaggedRow", what) {}
};

struct NegativeExpression : Error {
    explicit NegativeExpression(const std::string& what)
        : Error(ErrorKind::Data, "NegativeExpression", what) {}
};

struct DecodeError : Error {
    explicit DecodeError(const std::string& what)
        : Error(ErrorKind::Data, "DecodeError", what) {}
};

struct ZeroVariance : Error {
    explicit ZeroVariance(const std::string& what)
        : Error(ErrorKind::Numeric, "ZeroVariance", what) {}
};

struct LengthMismatch : Error {
    explicit LengthMismatch(const std::string& what)
        : Error(ErrorKind::Validation, "LengthMismatch", what) {}
};

struct TooFew : Error {
    explicit TooFew(const std::string& what)
        : Error(ErrorKind::Validation, "TooFew", what) {}
};

struct SinglePatient : Error {
    explicit SinglePatient(const std::string& what)
        : Error(ErrorKind::Data, "SinglePatient", what) {}
};

struct Empty : Error {
    explicit Empty(const std::string& what)
        : Error(ErrorKind::Validation, "Empty", what) {}
};

struct OutOfRange : Error {
    explicit OutOfRange(const std::string& what)
        : Error(ErrorKind::Validation, "OutOfRange", what) {}
};

struct TooFewRows : Error {
    explicit TooFewRows(const std::string& what)
        : Error(ErrorKind::Data, "TooFewRows", what) {}
};

struct NonFinite : Error {
    explicit NonFinite(const std::string& what)
        : Error(ErrorKind::Numeric, "NonFinite", what) {}
};

struct ColumnMismatch : Error {
    explicit ColumnMismatch(const std::string& what)
        : Error(ErrorKind::Data, "ColumnMismatch", what) {}
};

}  // namespace nsl

#endif  // NSL_ERRORS_HPP
