#include "picrnn/io/config.hpp"

#include "picrnn/io/portable_array.hpp"
#include "picrnn/units.hpp"

#include <cstdlib>

namespace picrnn::io {

using nlohmann::json;

namespace {

const json& require(const json& node, const std::string& key, const std::string& pointer) {
  if (!node.is_object()) throw ConfigError(pointer, "expected an object");
  auto it = node.find(key);
  if (it == node.end()) throw ConfigError(pointer + "/" + key, "missing required key");
  return *it;
}

template <typename T>
T number(const json& node, const std::string& pointer) {
  if (!node.is_number()) throw ConfigError(pointer, "expected a number");
  if constexpr (std::is_integral_v<T>) {
    if (!node.is_number_integer()) throw ConfigError(pointer, "expected an integer");
  }
  return node.get<T>();
}

template <typename T>
T optional_number(const json& node, const std::string& key, const std::string& pointer, T fallback) {
  if (!node.contains(key)) return fallback;
  return number<T>(node.at(key), pointer + "/" + key);
}

double positive(double v, const std::string& pointer) {
  if (!(v > 0)) throw ConfigError(pointer, "must be positive");
  return v;
}

Vector parse_field(const json& node, const std::string& pointer, const Grid& grid,
                   const std::filesystem::path& base_dir) {
  if (node.is_object() && node.contains("file")) {
    const std::string p = pointer + "/file";
    if (!node.at("file").is_string()) throw ConfigError(p, "expected a path string");
    std::filesystem::path file = node.at("file").get<std::string>();
    if (file.is_relative()) file = base_dir / file;
    if (!std::filesystem::exists(file)) throw ConfigError(p, "missing file " + file.string());
    const PortableArray a = read_array(file);
    if (a.count() != std::uint64_t(grid.size()))
      throw ConfigError(p, "field has " + std::to_string(a.count()) + " values, grid has " +
                               std::to_string(grid.size()));
    double factor = 1.0;
    if (node.contains("unit")) {
      try {
        factor = si_factor(parse_unit(node.at("unit").get<std::string>()));
      } catch (const std::exception& e) {
        throw ConfigError(pointer + "/unit", e.what());
      }
    }
    Vector v = Eigen::Map<const Vector>(a.data.data(), Index(a.data.size())) * factor;
    return v;
  }
  if (node.is_object() && node.contains("generate")) {
    const json& g = node.at("generate");
    const std::string p = pointer + "/generate";
    const double mean = positive(parse_quantity(require(g, "mean", p), p + "/mean"), p + "/mean");
    const double log_std = optional_number<double>(g, "log_std", p, 1.0);
    const double corr = optional_number<double>(g, "correlation_cells", p, 4.0);
    const auto seed = optional_number<std::uint64_t>(g, "seed", p, 0);
    return lognormal_permeability(grid, mean, log_std, corr, seed);
  }
  return Vector::Constant(grid.size(), parse_quantity(node, pointer));
}

ControlKind parse_kind(const json& node, const std::string& pointer) {
  if (!node.is_string()) throw ConfigError(pointer, "expected \"bhp\" or \"rate\"");
  const auto s = node.get<std::string>();
  if (s == "bhp" || s == "BHP") return ControlKind::Bhp;
  if (s == "rate" || s == "RATE") return ControlKind::Rate;
  throw ConfigError(pointer, "unknown control kind '" + s + "'");
}

Vector parse_controls(const json& node, const std::string& pointer, std::size_t wells) {
  if (!node.is_array()) throw ConfigError(pointer, "expected an array of controls");
  if (node.size() != wells)
    throw ConfigError(pointer, "expected " + std::to_string(wells) + " controls, got " +
                                   std::to_string(node.size()));
  Vector u(Index(node.size()));
  for (std::size_t w = 0; w < node.size(); ++w)
    u[Index(w)] = parse_quantity(node[w], pointer + "/" + std::to_string(w));
  return u;
}

ControlSchedule parse_schedule(const json& node, const std::string& pointer, std::size_t wells) {
  const double dt = positive(parse_quantity(require(node, "dt", pointer), pointer + "/dt"), pointer + "/dt");
  const int steps = number<int>(require(node, "steps", pointer), pointer + "/steps");
  if (steps < 1) throw ConfigError(pointer + "/steps", "must be >= 1");
  if (node.contains("constant"))
    return ControlSchedule::constant(parse_controls(node.at("constant"), pointer + "/constant", wells), dt, steps);
  const json& segs = require(node, "segments", pointer);
  if (!segs.is_array() || segs.empty()) throw ConfigError(pointer + "/segments", "expected a non-empty array");
  std::vector<ControlSchedule::Segment> segments;
  for (std::size_t s = 0; s < segs.size(); ++s) {
    const std::string p = pointer + "/segments/" + std::to_string(s);
    segments.push_back({parse_quantity(require(segs[s], "start", p), p + "/start"),
                        parse_controls(require(segs[s], "controls", p), p + "/controls", wells)});
  }
  try {
    return ControlSchedule::piecewise(segments, dt, steps);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(pointer + "/segments", e.what());
  }
}

SolverConfig parse_solver(const json& node, const std::string& pointer) {
  SolverConfig cfg;
  cfg.tolerance = optional_number<double>(node, "tolerance", pointer, cfg.tolerance);
  cfg.max_iterations = optional_number<int>(node, "max_iterations", pointer, cfg.max_iterations);
  cfg.jacobi = node.value("jacobi", false);
  if (node.contains("method")) {
    const auto m = node.at("method").get<std::string>();
    if (m == "cg") cfg.method = LinearMethod::ConjugateGradient;
    else if (m == "dense") cfg.method = LinearMethod::DenseDirect;
    else throw ConfigError(pointer + "/method", "expected \"cg\" or \"dense\"");
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(pointer, e.what());
  }
  return cfg;
}

}  // namespace

double parse_quantity(const json& node, const std::string& pointer) {
  if (node.is_number()) return node.get<double>();
  if (!node.is_object() || !node.contains("value"))
    throw ConfigError(pointer, "expected a number or {\"value\", \"unit\"}");
  const double value = number<double>(node.at("value"), pointer + "/value");
  if (!node.contains("unit")) return value;
  if (!node.at("unit").is_string()) throw ConfigError(pointer + "/unit", "expected a unit tag");
  try {
    return to_si(value, parse_unit(node.at("unit").get<std::string>()));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(pointer + "/unit", e.what());
  }
}

TrainConfig parse_train_config(const json& node, const std::string& pointer) {
  TrainConfig cfg;
  if (node.is_null()) return cfg;
  if (!node.is_object()) throw ConfigError(pointer, "expected an object");
  cfg.epochs = optional_number<int>(node, "epochs", pointer, cfg.epochs);
  cfg.learning_rate = optional_number<double>(node, "learning_rate", pointer, cfg.learning_rate);
  cfg.decay = optional_number<double>(node, "decay", pointer, cfg.decay);
  cfg.decay_interval = optional_number<int>(node, "decay_interval", pointer, cfg.decay_interval);
  cfg.steps = optional_number<int>(node, "steps", pointer, cfg.steps);
  cfg.seed = optional_number<std::uint64_t>(node, "seed", pointer, cfg.seed);
  cfg.checkpoint_every = optional_number<int>(node, "checkpoint_every", pointer, cfg.checkpoint_every);
  if (node.contains("clip_norm") && !node.at("clip_norm").is_null())
    cfg.clip_norm = number<double>(node.at("clip_norm"), pointer + "/clip_norm");
  if (node.contains("scaling")) {
    const auto s = node.at("scaling").get<std::string>();
    if (s == "nondimensional") {
      cfg.loss.scaling = ResidualScaling::Nondimensional;
    } else if (s == "paper-units") {
      cfg.loss.scaling = ResidualScaling::PaperUnits;
      cfg.loss.beta = 50.0;
    } else {
      throw ConfigError(pointer + "/scaling", "expected \"nondimensional\" or \"paper-units\"");
    }
  }
  cfg.loss.beta = optional_number<double>(node, "beta", pointer, cfg.loss.beta);
  if (node.contains("adam")) {
    const json& a = node.at("adam");
    const std::string p = pointer + "/adam";
    cfg.adam.beta1 = optional_number<double>(a, "beta1", p, cfg.adam.beta1);
    cfg.adam.beta2 = optional_number<double>(a, "beta2", p, cfg.adam.beta2);
    cfg.adam.epsilon = optional_number<double>(a, "epsilon", p, cfg.adam.epsilon);
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(pointer, e.what());
  }
  return cfg;
}

json to_json(const TrainConfig& cfg) {
  json j{{"epochs", cfg.epochs},
         {"learning_rate", cfg.learning_rate},
         {"decay", cfg.decay},
         {"decay_interval", cfg.decay_interval},
         {"steps", cfg.steps},
         {"beta", cfg.loss.beta},
         {"scaling", cfg.loss.scaling == ResidualScaling::PaperUnits ? "paper-units" : "nondimensional"},
         {"seed", cfg.seed},
         {"checkpoint_every", cfg.checkpoint_every},
         {"adam", {{"beta1", cfg.adam.beta1}, {"beta2", cfg.adam.beta2}, {"epsilon", cfg.adam.epsilon}}}};
  j["clip_norm"] = cfg.clip_norm ? json(*cfg.clip_norm) : json(nullptr);
  return j;
}

json to_json(const Architecture& a) {
  return {{"height", a.height},
          {"width", a.width},
          {"downscale", a.downscale},
          {"encoder_channels", a.encoder_channels},
          {"encoder_kernel", a.encoder_kernel},
          {"control_kernel", a.control_kernel},
          {"hidden_channels", a.hidden_channels},
          {"cell_kernel", a.cell_kernel},
          {"decoder_channels", a.decoder_channels},
          {"decoder_kernel", a.decoder_kernel}};
}

Architecture parse_architecture(const json& node, const std::string& pointer, Architecture a) {
  if (node.is_null()) return a;
  if (!node.is_object()) throw ConfigError(pointer, "expected an object");
  a.height = optional_number<int>(node, "height", pointer, a.height);
  a.width = optional_number<int>(node, "width", pointer, a.width);
  a.downscale = optional_number<int>(node, "downscale", pointer, a.downscale);
  a.encoder_kernel = optional_number<int>(node, "encoder_kernel", pointer, a.encoder_kernel);
  a.control_kernel = optional_number<int>(node, "control_kernel", pointer, a.control_kernel);
  a.hidden_channels = optional_number<int>(node, "hidden_channels", pointer, a.hidden_channels);
  a.cell_kernel = optional_number<int>(node, "cell_kernel", pointer, a.cell_kernel);
  a.decoder_kernel = optional_number<int>(node, "decoder_kernel", pointer, a.decoder_kernel);
  auto triple = [&](const char* key, std::array<int, 3>& out) {
    if (!node.contains(key)) return;
    const json& v = node.at(key);
    if (!v.is_array() || v.size() != 3) throw ConfigError(pointer + "/" + key, "expected three channel counts");
    for (std::size_t i = 0; i < 3; ++i) out[i] = number<int>(v[i], pointer + "/" + key + "/" + std::to_string(i));
  };
  triple("encoder_channels", a.encoder_channels);
  triple("decoder_channels", a.decoder_channels);
  try {
    a.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(pointer, e.what());
  }
  return a;
}

CaseConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  CaseConfig cfg;
  cfg.source = doc;
  if (!doc.is_object()) throw ConfigError("", "configuration must be a JSON object");

  const json& g = require(doc, "grid", "");
  Grid grid;
  grid.nx = number<int>(require(g, "nx", "/grid"), "/grid/nx");
  grid.ny = number<int>(require(g, "ny", "/grid"), "/grid/ny");
  if (grid.nx < 1) throw ConfigError("/grid/nx", "must be >= 1");
  if (grid.ny < 1) throw ConfigError("/grid/ny", "must be >= 1");
  grid.dx = positive(parse_quantity(require(g, "dx", "/grid"), "/grid/dx"), "/grid/dx");
  grid.dy = positive(parse_quantity(require(g, "dy", "/grid"), "/grid/dy"), "/grid/dy");
  grid.dz = g.contains("dz") ? positive(parse_quantity(g.at("dz"), "/grid/dz"), "/grid/dz") : 1.0;
  cfg.model.grid = grid;

  const json& rock = require(doc, "rock", "");
  cfg.model.rock.porosity = parse_field(require(rock, "porosity", "/rock"), "/rock/porosity", grid, base_dir);
  cfg.model.rock.permeability =
      parse_field(require(rock, "permeability", "/rock"), "/rock/permeability", grid, base_dir);

  const json& fluid = require(doc, "fluid", "");
  cfg.model.rock.viscosity = parse_quantity(require(fluid, "viscosity", "/fluid"), "/fluid/viscosity");
  cfg.model.rock.compressibility =
      parse_quantity(require(fluid, "compressibility", "/fluid"), "/fluid/compressibility");
  cfg.model.rock.initial_pressure =
      parse_quantity(require(fluid, "initial_pressure", "/fluid"), "/fluid/initial_pressure");
  if (fluid.contains("density")) cfg.model.rock.density = parse_quantity(fluid.at("density"), "/fluid/density");

  const json& wells = require(doc, "wells", "");
  if (!wells.is_array()) throw ConfigError("/wells", "expected an array");
  for (std::size_t w = 0; w < wells.size(); ++w) {
    const std::string p = "/wells/" + std::to_string(w);
    WellSpec spec;
    spec.name = wells[w].value("name", "W" + std::to_string(w + 1));
    spec.i = number<int>(require(wells[w], "i", p), p + "/i");
    spec.j = number<int>(require(wells[w], "j", p), p + "/j");
    spec.radius = wells[w].contains("radius") ? parse_quantity(wells[w].at("radius"), p + "/radius") : spec.radius;
    spec.skin = optional_number<double>(wells[w], "skin", p, 0.0);
    if (wells[w].contains("control")) spec.kind = parse_kind(wells[w].at("control"), p + "/control");
    if (!grid.contains(spec.i, spec.j)) throw ConfigError(p, "well outside grid");
    cfg.model.wells.push_back(spec);
  }

  if (auto report = validate_model(cfg.model); !report.empty()) throw ConfigError("", report.front());

  cfg.schedule = parse_schedule(require(doc, "schedule", ""), "/schedule", cfg.model.wells.size());
  cfg.solver = doc.contains("solver") ? parse_solver(doc.at("solver"), "/solver") : SolverConfig{};

  Architecture arch;
  arch.height = grid.ny;
  arch.width = grid.nx;
  cfg.arch = parse_architecture(doc.value("architecture", json(nullptr)), "/architecture", arch);
  if (cfg.arch.height != grid.ny || cfg.arch.width != grid.nx)
    throw ConfigError("/architecture", "network grid does not match reservoir grid");

  cfg.train = parse_train_config(doc.value("training", json(nullptr)), "/training");
  if (cfg.train.steps > cfg.schedule.num_steps())
    throw ConfigError("/training/steps", "unrolled horizon exceeds the schedule");
  cfg.extrapolate_steps = doc.contains("extrapolate")
                              ? number<int>(doc.at("extrapolate"), "/extrapolate")
                              : cfg.schedule.num_steps() - cfg.train.steps;
  if (doc.contains("report_days")) {
    const json& days = doc.at("report_days");
    if (!days.is_array()) throw ConfigError("/report_days", "expected an array");
    for (std::size_t d = 0; d < days.size(); ++d)
      cfg.report_days.push_back(number<double>(days[d], "/report_days/" + std::to_string(d)));
  }
  return cfg;
}

CaseConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("missing file " + path.string());
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(doc, path.parent_path());
}

void apply_environment(TrainConfig& cfg) {
  if (const char* seed = std::getenv("PICRNN_SEED"); seed && *seed) cfg.seed = std::stoull(seed);
}

std::filesystem::path output_path(const std::filesystem::path& path) {
  if (const char* dir = std::getenv("PICRNN_OUTPUT_DIR"); dir && *dir && path.is_relative())
    return std::filesystem::path(dir) / path;
  return path;
}

}  // namespace picrnn::io
