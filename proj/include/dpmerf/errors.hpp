#pragma once

#include <stdexcept>
#include <string>

namespace dpmerf {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidConfig : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct DegenerateData : Error { using Error::Error; };
struct EmptyDataset : Error { using Error::Error; };
struct LabelOutOfRange : Error { using Error::Error; };
struct NonBinaryCategorical : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct InvalidOrder : Error { using Error::Error; };
struct EmptyGrid : Error { using Error::Error; };
struct Unsatisfiable : Error { using Error::Error; };
struct InvalidSigma : Error { using Error::Error; };
struct InvalidArch : Error { using Error::Error; };
struct DivergedLoss : Error { using Error::Error; };
struct InvalidSchema : Error { using Error::Error; };
struct SchemaMismatch : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct SingleClassTrain : Error { using Error::Error; };
struct ModelVersionMismatch : Error { using Error::Error; };

}  // namespace dpmerf
