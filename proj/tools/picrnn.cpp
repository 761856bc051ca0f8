#include "picrnn/fv_simulator.hpp"
#include "picrnn/io/checkpoint.hpp"
#include "picrnn/io/config.hpp"
#include "picrnn/io/heatmap.hpp"
#include "picrnn/io/portable_array.hpp"
#include "picrnn/io/report.hpp"
#include "picrnn/statespace.hpp"
#include "picrnn/training.hpp"
#include "picrnn/units.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace picrnn;

namespace {

class MissingFile : public std::runtime_error {
 public:
  explicit MissingFile(const fs::path& path) : std::runtime_error("missing file " + path.string()), path_(path) {}
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void require_exists(const fs::path& path) {
  if (!fs::exists(path)) throw MissingFile(path);
}

void fail(const std::string& kind, const std::string& message, const json& extra = json::object()) {
  json line = extra;
  line["error"] = kind;
  line["message"] = message;
  std::cerr << line.dump() << "\n";
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  io::write_file_atomic(path, text);
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

/// Schedule columns [0, count), holding the last control if the case is shorter.
ControlSchedule extended(const ControlSchedule& schedule, int count) {
  if (count <= schedule.num_steps()) return schedule.slice(0, count);
  Eigen::MatrixXd values(schedule.num_wells(), count);
  values.leftCols(schedule.num_steps()) = schedule.values();
  for (int k = schedule.num_steps(); k < count; ++k) values.col(k) = schedule.values().col(schedule.num_steps() - 1);
  return ControlSchedule(values, schedule.dt());
}

io::CaseConfig case_from_checkpoint(const io::Checkpoint& ckpt) {
  const json& c = ckpt.case_config;
  if (!c.contains("document")) throw std::runtime_error("checkpoint has no case description");
  return io::parse_config(c.at("document"), c.value("base_dir", std::string(".")));
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string config, out, rates;
  int steps = -1;
};

int run_simulate(const SimulateArgs& a) {
  require_exists(a.config);
  const io::CaseConfig cfg = io::load_config(a.config);
  const StateSpaceSystem system = assemble(cfg.model);
  const int steps = a.steps < 0 ? cfg.schedule.num_steps() : a.steps;
  const ControlSchedule schedule = extended(cfg.schedule, steps);
  for (const auto& w : schedule_warnings(cfg.model, schedule)) std::cerr << "warning: " << w << "\n";

  const Trajectory traj = simulate(system, cfg.model.initial_state(), schedule, cfg.solver);
  const fs::path out = io::output_path(a.out);
  ensure_parent(out);
  io::write_trajectory(out, traj, cfg.model.grid);

  if (!a.rates.empty()) {
    std::vector<Vector> rates;
    for (int k = 0; k < traj.num_steps(); ++k)
      rates.push_back(well_rates(system, traj.states[std::size_t(k) + 1], schedule.control_at(k)));
    write_text(io::output_path(a.rates), io::well_rate_csv(rates, cfg.model.wells, schedule.dt()));
  }
  std::cout << json{{"trajectory", out.string()}, {"snapshots", traj.states.size()}}.dump() << "\n";
  return 0;
}

// ---------------------------------------------------------------- assemble

int run_assemble(const std::string& config, const std::string& out_dir) {
  require_exists(config);
  const io::CaseConfig cfg = io::load_config(config);
  const StateSpaceSystem s = assemble(cfg.model);
  const fs::path dir = io::output_path(out_dir);
  fs::create_directories(dir);

  const auto n = std::uint64_t(s.n), m = std::uint64_t(s.m);
  io::write_array(dir / "V.parr", {{n}, std::vector<double>(s.accumulation.data(), s.accumulation.data() + s.n)});

  // T is written as (row, col, value) triplets in row-major order.
  io::PortableArray t;
  for (Index r = 0; r < s.transmissibility.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(s.transmissibility, r); it; ++it) {
      t.data.push_back(double(it.row()));
      t.data.push_back(double(it.col()));
      t.data.push_back(it.value());
    }
  t.dims = {std::uint64_t(t.data.size() / 3), 3};
  io::write_array(dir / "T.parr", t);

  io::PortableArray b{{n, m}, std::vector<double>(n * m, 0.0)};
  for (Index r = 0; r < s.control.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(s.control, r); it; ++it) b.data[std::size_t(it.row()) * m + std::size_t(it.col())] = it.value();
  io::write_array(dir / "B.parr", b);
  io::write_array(dir / "PI.parr", {{m}, std::vector<double>(s.productivity.data(), s.productivity.data() + s.m)});

  std::cout << json{{"n", s.n}, {"m", s.m}, {"nnz_T", t.dims[0]}, {"dir", dir.string()}}.dump() << "\n";
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string config, checkpoint, loss_csv;
  int epochs = -1, steps = -1;
  bool quiet = false;
};

std::string loss_csv(const LossRecord& r) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,loss,lr,wall_ms\n";
  for (std::size_t e = 0; e < r.loss.size(); ++e) os << e << ',' << r.loss[e] << ',' << r.lr[e] << ',' << r.wall_ms[e] << '\n';
  return os.str();
}

io::Checkpoint make_checkpoint(const PicrnnParams& params, const Normalizer& norm, const TrainConfig& train,
                               const json& case_doc, const ReservoirModel& model, const ControlSchedule& schedule) {
  io::Checkpoint ckpt{params.clone(), norm, train, case_doc, std::nullopt, std::nullopt, train.steps};
  ad::NoGradGuard no_grad;
  const auto& arch = params.arch;
  const RolloutResult r = rollout(params, field_tensor(model.initial_state(), arch.height, arch.width), schedule, 0,
                                  train.steps, HiddenState::zeros(arch), norm, model.wells);
  ckpt.hidden = r.hidden;
  ckpt.last_state = field_vector(r.states.back());
  return ckpt;
}

int run_train(const TrainArgs& a) {
  require_exists(a.config);
  io::CaseConfig cfg = io::load_config(a.config);
  io::apply_environment(cfg.train);
  if (a.epochs >= 0) cfg.train.epochs = a.epochs;
  if (a.steps >= 0) cfg.train.steps = a.steps;
  cfg.train.validate();
  if (cfg.train.steps > cfg.schedule.num_steps()) throw io::ConfigError("/training/steps", "unrolled horizon exceeds the schedule");

  const StateSpaceSystem system = assemble(cfg.model);
  const ControlSchedule schedule = cfg.schedule.slice(0, cfg.train.steps);
  const Normalizer norm = Normalizer::from(cfg.model, cfg.schedule);
  const TrainingProblem problem{system, cfg.model, cfg.model.initial_state(), schedule, norm};
  const json case_doc{{"document", cfg.source}, {"base_dir", fs::absolute(fs::path(a.config)).parent_path().string()}};
  const fs::path ckpt_dir = io::output_path(a.checkpoint);
  ensure_parent(ckpt_dir);

  const auto on_epoch = [&](int epoch, double loss, const PicrnnParams& params) {
    const bool report = cfg.train.checkpoint_every > 0 && (epoch + 1) % cfg.train.checkpoint_every == 0;
    if (report) {
      if (!a.quiet) std::cerr << "epoch " << epoch + 1 << " loss " << loss << "\n";
      io::save_checkpoint(ckpt_dir, make_checkpoint(params, norm, cfg.train, case_doc, cfg.model, schedule));
    }
    return true;
  };

  TrainResult result;
  try {
    result = train(problem, PicrnnParams::initialize(cfg.arch, cfg.train.seed), cfg.train, on_epoch);
  } catch (const TrainingDiverged& e) {
    if (!a.loss_csv.empty()) write_text(io::output_path(a.loss_csv), loss_csv(e.record()));
    io::save_checkpoint(ckpt_dir, make_checkpoint(e.checkpoint(), norm, cfg.train, case_doc, cfg.model, schedule));
    fail("diverged", e.what(), {{"epoch", e.epoch()}, {"checkpoint", ckpt_dir.string()}});
    return 4;
  }
  io::save_checkpoint(ckpt_dir, make_checkpoint(result.params, norm, cfg.train, case_doc, cfg.model, schedule));
  if (!a.loss_csv.empty()) write_text(io::output_path(a.loss_csv), loss_csv(result.record));

  const auto& loss = result.record.loss;
  std::cout << json{{"checkpoint", ckpt_dir.string()},
                    {"epochs", loss.size()},
                    {"first_loss", loss.empty() ? 0.0 : loss.front()},
                    {"final_loss", loss.empty() ? 0.0 : loss.back()},
                    {"best_loss", result.best_loss}}
                   .dump()
            << "\n";
  return 0;
}

// ---------------------------------------------------------------- predict

struct PredictArgs {
  std::string checkpoint, out, config, hidden_out;
  int steps = -1, extrapolate = 0;
};

int run_predict(const PredictArgs& a) {
  require_exists(fs::path(a.checkpoint) / "manifest.json");
  const io::Checkpoint ckpt = io::load_checkpoint(a.checkpoint);
  io::CaseConfig cfg;
  if (a.config.empty()) {
    cfg = case_from_checkpoint(ckpt);
  } else {
    require_exists(a.config);
    cfg = io::load_config(a.config);
  }
  const int steps = a.steps < 0 ? ckpt.trained_steps : a.steps;
  if (steps < 0 || a.extrapolate < 0) throw std::invalid_argument("step counts must be non-negative");
  const ControlSchedule schedule = extended(cfg.schedule, steps + a.extrapolate);
  const auto& arch = ckpt.params.arch;
  if (arch.height != cfg.model.grid.ny || arch.width != cfg.model.grid.nx)
    throw std::invalid_argument("checkpoint grid does not match the case grid");

  ad::NoGradGuard no_grad;
  const RolloutResult head = rollout(ckpt.params, field_tensor(cfg.model.initial_state(), arch.height, arch.width),
                                     schedule, 0, steps, HiddenState::zeros(arch), ckpt.normalizer, cfg.model.wells);
  Trajectory traj = to_trajectory(head.states, schedule.dt());
  HiddenState hidden = head.hidden;
  if (a.extrapolate > 0) {
    const Prediction tail = extrapolate(ckpt.params, traj.states.back(), head.hidden, schedule, steps, a.extrapolate,
                                        ckpt.normalizer, cfg.model.wells);
    traj.states.insert(traj.states.end(), tail.trajectory.states.begin(), tail.trajectory.states.end());
    hidden = tail.hidden;
  }

  const fs::path out = io::output_path(a.out);
  ensure_parent(out);
  io::write_trajectory(out, traj, cfg.model.grid);
  const fs::path hidden_dir = io::output_path(a.hidden_out.empty() ? a.out + ".hidden" : a.hidden_out);
  fs::create_directories(hidden_dir);
  const auto dump = [&](const ad::Tensor& t, const char* name) {
    io::PortableArray arr;
    for (int d : t.shape()) arr.dims.push_back(std::uint64_t(d));
    arr.data.assign(t.data().begin(), t.data().end());
    io::write_array(hidden_dir / name, arr);
  };
  dump(hidden.h, "h.parr");
  dump(hidden.c, "c.parr");

  std::cout << json{{"trajectory", out.string()}, {"snapshots", traj.states.size()}, {"hidden", hidden_dir.string()}}.dump()
            << "\n";
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string ref, test, config, csv;
  std::vector<double> days;
  int radius = 3;
};

json stats_json(const io::ErrorStats& s) {
  return {{"max", s.max}, {"mean", s.mean}, {"p95", s.p95}, {"cells", s.cells}};
}

int run_eval(const EvalArgs& a) {
  require_exists(a.ref);
  require_exists(a.test);
  const Trajectory ref = io::read_trajectory(a.ref);
  const Trajectory test = io::read_trajectory(a.test);
  const auto [nx, ny] = io::trajectory_shape(a.ref);
  if (io::trajectory_shape(a.test) != std::pair{nx, ny}) throw std::invalid_argument("trajectories have different grids");

  Grid grid{nx, ny, 1.0, 1.0, 1.0};
  std::vector<WellSpec> wells;
  std::vector<double> days = a.days;
  if (!a.config.empty()) {
    require_exists(a.config);
    const io::CaseConfig cfg = io::load_config(a.config);
    if (cfg.model.grid.nx != nx || cfg.model.grid.ny != ny) throw std::invalid_argument("config grid does not match trajectories");
    grid = cfg.model.grid;
    wells = cfg.model.wells;
    if (days.empty()) days = cfg.report_days;
  }
  const int last = int(std::min(ref.states.size(), test.states.size())) - 1;
  std::vector<int> steps;
  if (!days.empty()) steps = io::report_steps(days, ref.dt, last);
  const io::ErrorReport report = io::compare(ref, test, grid, wells, steps);
  if (!a.csv.empty()) write_text(io::output_path(a.csv), io::error_csv(report, ref.dt));

  json snaps = json::array();
  for (std::size_t s = 0; s < report.steps.size(); ++s) {
    const auto& e = report.snapshots[s];
    snaps.push_back({{"step", report.steps[s]},
                     {"day", report.steps[s] * ref.dt / constants::day},
                     {"all", stats_json(e.all)},
                     {"near_well", stats_json(e.near_well)},
                     {"far_field", stats_json(e.far_field)}});
  }
  std::cout << json{{"snapshots", snaps}}.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------- heatmap

struct HeatmapArgs {
  std::string input, ref, out;
  int snapshot = -1;
};

int run_heatmap(const HeatmapArgs& a) {
  require_exists(a.input);
  const Trajectory traj = io::read_trajectory(a.input);
  const auto [nx, ny] = io::trajectory_shape(a.input);
  const int k = a.snapshot < 0 ? int(traj.states.size()) - 1 : a.snapshot;
  if (k >= int(traj.states.size())) throw std::out_of_range("snapshot " + std::to_string(k) + " not in trajectory");
  Vector field = traj.states[std::size_t(k)];
  if (!a.ref.empty()) {
    require_exists(a.ref);
    const Trajectory ref = io::read_trajectory(a.ref);
    if (k >= int(ref.states.size())) throw std::out_of_range("snapshot " + std::to_string(k) + " not in reference");
    field = io::relative_error_map(ref.states[std::size_t(k)], field, Grid{nx, ny, 1.0, 1.0, 1.0}, {}).field;
  }
  if (!field.allFinite()) throw std::domain_error("field contains non-finite values");
  const fs::path out = io::output_path(a.out);
  ensure_parent(out);
  const io::HeatmapBounds b = io::write_heatmap(out, std::span<const double>(field.data(), std::size_t(field.size())), nx, ny);
  std::cout << json{{"image", out.string()}, {"min", b.min}, {"max", b.max}, {"constant", b.constant}}.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Physics-informed recurrent surrogate for single-phase reservoir flow"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Run the finite-volume simulator");
  simulate_cmd->add_option("--config", sim.config, "Case file")->required();
  simulate_cmd->add_option("--out", sim.out, "Trajectory output (.parr)")->required();
  simulate_cmd->add_option("--steps", sim.steps, "Number of steps (default: whole schedule)");
  simulate_cmd->add_option("--rates", sim.rates, "Well rate CSV output");

  std::string asm_config, asm_out;
  auto* assemble_cmd = app.add_subcommand("assemble", "Export V, T, B and PI");
  assemble_cmd->add_option("--config", asm_config, "Case file")->required();
  assemble_cmd->add_option("--out-dir", asm_out, "Output directory")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train the surrogate on the physics residual");
  train_cmd->add_option("--config", tr.config, "Case file")->required();
  train_cmd->add_option("--checkpoint", tr.checkpoint, "Checkpoint directory")->required();
  train_cmd->add_option("--epochs", tr.epochs, "Override training epochs");
  train_cmd->add_option("--steps", tr.steps, "Override unrolled steps");
  train_cmd->add_option("--loss-csv", tr.loss_csv, "Loss history CSV output");
  train_cmd->add_flag("--quiet", tr.quiet, "No progress output");

  PredictArgs pr;
  auto* predict_cmd = app.add_subcommand("predict", "Roll out a trained surrogate");
  predict_cmd->add_option("--checkpoint", pr.checkpoint, "Checkpoint directory")->required();
  predict_cmd->add_option("--out", pr.out, "Trajectory output (.parr)")->required();
  predict_cmd->add_option("--steps", pr.steps, "Rollout steps from the initial state (default: trained steps)");
  predict_cmd->add_option("--extrapolate", pr.extrapolate, "Further steps continued from the final hidden state");
  predict_cmd->add_option("--config", pr.config, "Case file overriding the one stored in the checkpoint");
  predict_cmd->add_option("--hidden-out", pr.hidden_out, "Directory for the final hidden state");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Relative error of a trajectory against a reference");
  eval_cmd->add_option("--ref", ev.ref, "Reference trajectory")->required();
  eval_cmd->add_option("--test", ev.test, "Trajectory under test")->required();
  eval_cmd->add_option("--config", ev.config, "Case file (grid, wells, report days)");
  eval_cmd->add_option("--days", ev.days, "Report times in days");
  eval_cmd->add_option("--csv", ev.csv, "Error statistics CSV output");

  HeatmapArgs hm;
  auto* heatmap_cmd = app.add_subcommand("heatmap", "Render a snapshot or its error field as PGM");
  heatmap_cmd->add_option("--input", hm.input, "Trajectory")->required();
  heatmap_cmd->add_option("--snapshot", hm.snapshot, "Snapshot index (default: last)");
  heatmap_cmd->add_option("--ref", hm.ref, "Reference trajectory; renders the relative error instead");
  heatmap_cmd->add_option("--out", hm.out, "Image output (.pgm)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    fail("usage", e.what());
    return 2;
  }

  try {
    if (*simulate_cmd) return run_simulate(sim);
    if (*assemble_cmd) return run_assemble(asm_config, asm_out);
    if (*train_cmd) return run_train(tr);
    if (*predict_cmd) return run_predict(pr);
    if (*eval_cmd) return run_eval(ev);
    if (*heatmap_cmd) return run_heatmap(hm);
  } catch (const io::ConfigError& e) {
    fail("config", e.what(), {{"pointer", e.pointer()}});
    return 3;
  } catch (const MissingFile& e) {
    fail("missing_file", e.what(), {{"path", e.path().string()}});
    return 3;
  } catch (const SimulationError& e) {
    fail("simulation", e.what(), {{"step", e.step()}});
    return 4;
  } catch (const std::exception& e) {
    fail("runtime", e.what());
    return 1;
  }
  return 2;
}
