#pragma once

#include <json.hpp>

#include "shrinkdetect/detectors.hpp"
#include "shrinkdetect/estimators.hpp"
#include "shrinkdetect/models.hpp"

namespace shrinkdetect {

using Json = nlohmann::json;

inline constexpr const char* kSnapshotSchema = "shrinkdetect.detector_state";
inline constexpr int kSnapshotVersion = 1;

/// Reals that may be infinite are written as numbers when finite and as the
/// strings "inf", "-inf" or "nan" otherwise.
Json real_to_json(double v);
double real_from_json(const Json& j);

void to_json(Json& j, const ModelSpec& m);
void from_json(const Json& j, ModelSpec& m);
void to_json(Json& j, const EstimatorRule& r);
void from_json(const Json& j, EstimatorRule& r);
void to_json(Json& j, const DetectorSpec& s);
void from_json(const Json& j, DetectorSpec& s);

/// Field-named, versioned record of a detector's complete state. Unknown
/// fields are ignored on restore, so newer writers stay readable.
Json snapshot(const DetectorState& state);

/// Throws std::invalid_argument on a schema mismatch, a newer version or a
/// missing field.
DetectorState restore(const Json& record);

}  // namespace shrinkdetect
