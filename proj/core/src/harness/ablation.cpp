#include "cmig/harness/ablation.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cmig/errors.hpp"
#include "cmig/log.hpp"

namespace cmig::harness {

namespace {

bool& component(Toggles& t, const std::string& name) {
  if (name == "tf") return t.tf;
  if (name == "cmd") return t.cmd;
  if (name == "mcl") return t.mcl;
  if (name == "mp") return t.mp;
  throw ContractViolation("ablation: unknown component '" + name + "'");
}

template <typename T>
std::vector<T> axis_or(const std::vector<T>& axis, const T& fallback) {
  return axis.empty() ? std::vector<T>{fallback} : axis;
}

}  // namespace

Toggles parse_toggles(const std::string& preset) {
  if (preset == "all") return {};
  Toggles t{false, false, false, false};
  if (preset == "none") return t;
  if (preset.rfind("no_", 0) == 0) {
    Toggles all;
    component(all, preset.substr(3)) = false;
    return all;
  }
  std::stringstream ss(preset);
  std::string part;
  while (std::getline(ss, part, '+')) component(t, part) = true;
  return t;
}

std::string toggles_label(const Toggles& t) {
  if (t == Toggles{}) return "all";
  std::string out;
  for (auto [on, name] : {std::pair{t.tf, "tf"}, {t.cmd, "cmd"}, {t.mcl, "mcl"}, {t.mp, "mp"}}) {
    if (!on) continue;
    if (!out.empty()) out += '+';
    out += name;
  }
  return out.empty() ? "none" : out;
}

AblationAxes parse_axes(const std::string& text) {
  AblationAxes axes;
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object()) throw ContractViolation("ablation axes must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.key() == "n_iter") axes.n_iter = it->get<std::vector<std::size_t>>();
      else if (it.key() == "toggles") axes.toggles = it->get<std::vector<std::string>>();
      else if (it.key() == "variant") axes.variant = it->get<std::vector<std::string>>();
      else if (it.key() == "seed") axes.seed = it->get<std::vector<std::uint64_t>>();
      else throw ContractViolation("ablation: unknown axis '" + it.key() + "'");
    }
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("ablation axes: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ContractViolation(std::string("ablation axes: ") + e.what());
  }
  return axes;
}

AblationAxes load_axes(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_axes(ss.str());
}

std::vector<AblationRow> ablate(const RunConfig& base, const AblationAxes& axes,
                                const std::function<void(const AblationRow&)>& on_row) {
  // Materialise every configuration first so an invalid one fails before
  // any training time is spent.
  std::vector<RunConfig> grid;
  for (auto seed : axis_or(axes.seed, base.seed))
    for (const auto& preset : axis_or(axes.toggles, toggles_label(base.toggles)))
      for (const auto& variant : axis_or(axes.variant, network::to_string(base.model.variant)))
        for (auto n : axis_or(axes.n_iter, base.n_iter)) {
          RunConfig c = base;
          c.seed = seed;
          c.toggles = parse_toggles(preset);
          c.model.variant = network::match_variant_from_string(variant);
          c.n_iter = n;
          c.validate();
          grid.push_back(c);
        }

  std::vector<AblationRow> rows;
  for (const auto& c : grid) {
    AblationRow row;
    row.config = c;
    network::Model model = initial_model(c);
    const auto curve = train(model, c);
    if (!curve.empty()) row.final_loss = curve.back().total;
    const Dataset eval = make_eval_set(c);
    row.report = evaluate(model, eval, pipeline_options(c), c.eval.workers);
    row.report.config_hash = config_hash(c);
    log_info("ablation: seed " + std::to_string(c.seed) + " " + toggles_label(c.toggles) + " " +
             network::to_string(c.model.variant) + " n=" + std::to_string(c.n_iter) + " -> mean rotation " +
             std::to_string(row.report.mean_rotation_deg) + " deg");
    if (on_row) on_row(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_ablation_csv(const std::filesystem::path& path, std::span<const AblationRow> rows) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << "seed,n_iter,toggles,TF,CMD,MCL,MP,variant,RMSE_R,MAE_R,RMSE_t,MAE_t,mean_rotation_deg,final_loss\n";
  char buf[96];
  for (const auto& r : rows) {
    const auto& t = r.config.toggles;
    std::snprintf(buf, sizeof buf, ",%.9g,%.9g\n", r.report.mean_rotation_deg, r.final_loss);
    os << r.config.seed << ',' << r.config.n_iter << ',' << toggles_label(t) << ',' << t.tf << ',' << t.cmd << ','
       << t.mcl << ',' << t.mp << ',' << network::to_string(r.config.model.variant) << ','
       << format_error_row(r.report.aggregate) << buf;
  }
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace cmig::harness
