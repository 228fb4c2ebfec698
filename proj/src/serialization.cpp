#include "shrinkdetect/serialization.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace shrinkdetect {

namespace {

const Json& field(const Json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw std::invalid_argument(std::string("missing field '") + key + "'");
  return *it;
}

std::string to_string(OverflowPolicy policy) {
  return policy == OverflowPolicy::error ? "error" : "drop_oldest";
}

OverflowPolicy overflow_from_string(const std::string& name) {
  if (name == "error") return OverflowPolicy::error;
  if (name == "drop_oldest") return OverflowPolicy::drop_oldest;
  throw std::invalid_argument("unknown overflow policy '" + name + "'");
}

Json header(const char* detector, const ModelSpec& model, std::uint64_t time) {
  return Json{{"schema", kSnapshotSchema},
              {"version", kSnapshotVersion},
              {"detector", detector},
              {"model", model},
              {"time", time}};
}

}  // namespace

Json real_to_json(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double real_from_json(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw std::invalid_argument("expected a real number, got " + j.dump());
}

void to_json(Json& j, const ModelSpec& m) {
  j = Json{{"family", to_string(m.family)}, {"mu0", m.mu0}, {"p", m.p}};
}

void from_json(const Json& j, ModelSpec& m) {
  m.family = family_from_string(field(j, "family").get<std::string>());
  m.p = field(j, "p").get<std::size_t>();
  m.mu0 = j.contains("mu0") ? j.at("mu0").get<double>() : (m.family == Family::poisson ? 1.0 : 0.0);
}

void to_json(Json& j, const EstimatorRule& r) {
  j = Json{{"kind", to_string(r.kind)}, {"c", r.c},          {"omega", r.omega},
           {"a", r.a},                  {"b", r.b},          {"c0", r.c0},
           {"delta", r.delta},          {"clamp_js", r.clamp_js}};
}

void from_json(const Json& j, EstimatorRule& r) {
  EstimatorRule d;
  d.kind = rule_kind_from_string(field(j, "kind").get<std::string>());
  d.c = j.value("c", d.c);
  d.omega = j.value("omega", d.omega);
  d.a = j.value("a", d.a);
  d.b = j.value("b", d.b);
  d.c0 = j.value("c0", d.c0);
  d.delta = j.value("delta", d.delta);
  d.clamp_js = j.value("clamp_js", d.clamp_js);
  r = std::move(d);
}

void to_json(Json& j, const DetectorSpec& s) {
  j = Json{{"kind", to_string(s.kind)},
           {"model", s.model},
           {"rule", s.rule},
           {"mu_known", s.mu_known},
           {"overflow", to_string(s.overflow)}};
  j["max_candidates"] = s.max_candidates ? Json(*s.max_candidates) : Json(nullptr);
}

void from_json(const Json& j, DetectorSpec& s) {
  DetectorSpec d;
  d.kind = detector_kind_from_string(field(j, "kind").get<std::string>());
  d.model = field(j, "model").get<ModelSpec>();
  if (j.contains("rule")) d.rule = j.at("rule").get<EstimatorRule>();
  d.mu_known = j.value("mu_known", d.mu_known);
  if (j.contains("max_candidates") && !j.at("max_candidates").is_null()) {
    d.max_candidates = j.at("max_candidates").get<std::size_t>();
  }
  if (j.contains("overflow")) d.overflow = overflow_from_string(j.at("overflow").get<std::string>());
  s = std::move(d);
}

// ---------------------------------------------------------------------------

Json snapshot(const DetectorState& state) {
  return std::visit(
      [](const auto& s) -> Json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SrrsState>) {
          Json j = header("srrs", s.model, s.time);
          j["rule"] = s.rule;
          j["log_threshold"] = real_to_json(s.log_threshold);
          Json candidates = Json::array();
          const std::size_t p = s.model.p;
          for (std::size_t c = 0; c < s.birth.size(); ++c) {
            candidates.push_back(
                {{"birth", s.birth[c]},
                 {"sums", std::vector<double>(s.sums.begin() + c * p, s.sums.begin() + (c + 1) * p)},
                 {"log_lambda", real_to_json(s.log_lambda[c])}});
          }
          j["candidates"] = std::move(candidates);
          j["max_candidates"] = s.max_candidates ? Json(*s.max_candidates) : Json(nullptr);
          j["overflow"] = to_string(s.overflow);
          j["dropped_candidates"] = s.dropped_candidates;
          j["floor_events"] = s.floor_events;
          j["alarmed"] = s.alarmed;
          j["last_log_stat"] = real_to_json(s.last_log_stat);
          return j;
        } else if constexpr (std::is_same_v<T, SprtState>) {
          Json j = header("sprt", s.model, s.time);
          j["rule"] = s.rule;
          j["b"] = real_to_json(s.b);
          j["sums"] = s.stats.sums;
          j["count"] = s.stats.count;
          j["log_lambda"] = real_to_json(s.log_lambda);
          j["alarmed"] = s.alarmed;
          j["floor_events"] = s.floor_events;
          return j;
        } else if constexpr (std::is_same_v<T, KnownSrState>) {
          Json j = header("known_sr", s.model, s.time);
          j["mu_known"] = s.mu_known;
          j["log_threshold"] = real_to_json(s.log_threshold);
          j["log_r"] = real_to_json(s.log_r);
          return j;
        } else if constexpr (std::is_same_v<T, RecursiveState>) {
          Json j = header("recursive", s.model, s.time);
          j["delta"] = s.delta;
          j["omega"] = s.omega;
          j["log_threshold"] = real_to_json(s.log_threshold);
          j["log_r"] = real_to_json(s.log_r);
          j["mu_tilde"] = s.mu_tilde;
          return j;
        } else {
          Json j = header("cusum", s.model, s.time);
          j["mu1"] = s.mu1;
          j["aggregate"] = s.aggregate == CusumAggregate::max ? "max" : "sum";
          j["b"] = real_to_json(s.b);
          j["w"] = s.w;
          return j;
        }
      },
      state);
}

DetectorState restore(const Json& record) {
  if (!record.is_object()) throw std::invalid_argument("snapshot: record must be an object");
  if (field(record, "schema").get<std::string>() != kSnapshotSchema) {
    throw std::invalid_argument("snapshot: unexpected schema '" + record.at("schema").dump() + "'");
  }
  const int version = field(record, "version").get<int>();
  if (version > kSnapshotVersion) {
    throw std::invalid_argument("snapshot: version " + std::to_string(version) +
                                " is newer than supported version " +
                                std::to_string(kSnapshotVersion));
  }
  const std::string detector = field(record, "detector").get<std::string>();
  const ModelSpec model = field(record, "model").get<ModelSpec>();
  const std::uint64_t time = field(record, "time").get<std::uint64_t>();

  if (detector == "srrs") {
    SrrsState s;
    s.model = model;
    s.time = time;
    s.rule = field(record, "rule").get<EstimatorRule>();
    s.log_threshold = real_from_json(field(record, "log_threshold"));
    for (const Json& c : field(record, "candidates")) {
      s.birth.push_back(field(c, "birth").get<std::uint64_t>());
      const auto sums = field(c, "sums").get<std::vector<double>>();
      if (sums.size() != model.p) throw std::invalid_argument("snapshot: candidate sums length != p");
      s.sums.insert(s.sums.end(), sums.begin(), sums.end());
      s.log_lambda.push_back(real_from_json(field(c, "log_lambda")));
    }
    const Json& cap = field(record, "max_candidates");
    if (!cap.is_null()) s.max_candidates = cap.get<std::size_t>();
    s.overflow = overflow_from_string(field(record, "overflow").get<std::string>());
    s.dropped_candidates = field(record, "dropped_candidates").get<std::uint64_t>();
    s.floor_events = field(record, "floor_events").get<std::uint64_t>();
    s.alarmed = field(record, "alarmed").get<bool>();
    s.last_log_stat = real_from_json(field(record, "last_log_stat"));
    return s;
  }
  if (detector == "sprt") {
    SprtState s;
    s.model = model;
    s.time = time;
    s.rule = field(record, "rule").get<EstimatorRule>();
    s.b = real_from_json(field(record, "b"));
    s.stats.sums = field(record, "sums").get<std::vector<double>>();
    s.stats.count = field(record, "count").get<std::uint64_t>();
    s.log_lambda = real_from_json(field(record, "log_lambda"));
    s.alarmed = field(record, "alarmed").get<bool>();
    s.floor_events = field(record, "floor_events").get<std::uint64_t>();
    return s;
  }
  if (detector == "known_sr") {
    KnownSrState s;
    s.model = model;
    s.time = time;
    s.mu_known = field(record, "mu_known").get<MeanVector>();
    s.log_threshold = real_from_json(field(record, "log_threshold"));
    s.log_r = real_from_json(field(record, "log_r"));
    return s;
  }
  if (detector == "recursive") {
    RecursiveState s;
    s.model = model;
    s.time = time;
    s.delta = field(record, "delta").get<double>();
    s.omega = field(record, "omega").get<MeanVector>();
    s.log_threshold = real_from_json(field(record, "log_threshold"));
    s.log_r = real_from_json(field(record, "log_r"));
    s.mu_tilde = field(record, "mu_tilde").get<MeanVector>();
    return s;
  }
  if (detector == "cusum") {
    CusumState s;
    s.model = model;
    s.time = time;
    s.mu1 = field(record, "mu1").get<MeanVector>();
    const std::string aggregate = field(record, "aggregate").get<std::string>();
    if (aggregate != "max" && aggregate != "sum") {
      throw std::invalid_argument("snapshot: unknown CUSUM aggregate '" + aggregate + "'");
    }
    s.aggregate = aggregate == "max" ? CusumAggregate::max : CusumAggregate::sum;
    s.b = real_from_json(field(record, "b"));
    s.w = field(record, "w").get<std::vector<double>>();
    return s;
  }
  throw std::invalid_argument("snapshot: unknown detector '" + detector + "'");
}

}  // namespace shrinkdetect
