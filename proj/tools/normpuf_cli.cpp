// normpuf command-line tool.
//
// Exit codes: 0 success, 1 usage error, 2 domain error.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "normpuf/normpuf.hpp"

namespace fs = std::filesystem;
using namespace normpuf;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Settings {
  RunConfig run;
  SurfaceParams surface;
  StockParams stock;
  PhysAttackParams phys;
  int max_shift = 4;
  std::size_t budget = 10000;
  std::size_t holdout_sheets = 14;
  std::size_t scans_per_sheet = 3;
  std::size_t targets = 4;
  double variance_target = 0.99;
};

template <class T>
void read_key(const toml::table& t, std::string_view key, T& dst) {
  if (auto v = t[key].value<T>()) dst = *v;
}

void read_size(const toml::table& t, std::string_view key, std::size_t& dst) {
  if (auto v = t[key].value<std::int64_t>()) {
    if (*v < 0) throw Error(Errc::invalid_param, std::string(key) + " must be non-negative");
    dst = static_cast<std::size_t>(*v);
  }
}

void load_config(const fs::path& path, Settings& s) {
  toml::table t;
  try {
    t = toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    throw Error(Errc::format_error, "config " + path.string() + ": " + std::string(e.description()));
  }
  if (auto v = t["seed"].value<std::int64_t>()) s.run.seed = static_cast<std::uint64_t>(*v);
  read_key(t, "patch_size", s.run.patch_size);
  read_key(t, "threshold", s.run.threshold);
  read_key(t, "capture_count", s.run.capture_count);
  read_key(t, "noise_sigma", s.run.noise_sigma);
  read_key(t, "max_shift", s.max_shift);
  if (auto* sf = t["surface"].as_table()) {
    read_key(*sf, "correlation_length", s.surface.correlation_length);
    read_key(*sf, "roughness", s.surface.roughness);
    read_key(*sf, "albedo_mean", s.surface.albedo_mean);
    read_key(*sf, "albedo_contrast", s.surface.albedo_contrast);
    read_key(*sf, "albedo_length", s.surface.albedo_length);
  }
  if (auto* st = t["stock"].as_table()) {
    if (auto v = (*st)["seed"].value<std::int64_t>()) s.stock.seed = static_cast<std::uint64_t>(*v);
    read_key(*st, "pattern_count", s.stock.pattern_count);
    read_key(*st, "shared_fraction", s.stock.shared_fraction);
    read_key(*st, "pattern_length", s.stock.pattern_length);
  }
  if (auto* pa = t["physical"].as_table()) {
    read_key(*pa, "scratch_groove_slope", s.phys.scratch_groove_slope);
    read_key(*pa, "scratch_roughness_factor", s.phys.scratch_roughness_factor);
    read_key(*pa, "sticker_jitter", s.phys.sticker_jitter);
    read_key(*pa, "sticker_albedo", s.phys.sticker_albedo);
    read_key(*pa, "ink_albedo", s.phys.ink_albedo);
    read_key(*pa, "warp_amplitude", s.phys.warp_amplitude);
    read_key(*pa, "warp_length", s.phys.warp_length);
    read_key(*pa, "ironing", s.phys.ironing);
    read_key(*pa, "fold_band", s.phys.fold_band);
  }
  if (auto* dg = t["digital"].as_table()) {
    read_size(*dg, "budget", s.budget);
    read_size(*dg, "holdout_sheets", s.holdout_sheets);
    read_size(*dg, "scans_per_sheet", s.scans_per_sheet);
    read_size(*dg, "targets", s.targets);
    read_key(*dg, "variance_target", s.variance_target);
  }
}

/// Writes to `path`, or stdout when empty.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path, std::ios::trunc);
      if (!file_) throw Error(Errc::storage_failure, "cannot open " + path);
    }
  }
  std::ostream& os() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

std::string require(const std::string& v, const char* what) {
  if (v.empty()) throw UsageError(std::string("missing required ") + what);
  return v;
}

void announce_seed(std::uint64_t seed) { std::cerr << "seed=" << seed << '\n'; }

Protocol protocol_for(const Settings& s, const std::string& mode, int lights) {
  if (mode == "scanner") return Protocol::scanner(s.run.noise_sigma);
  if (mode == "mobile") return Protocol::mobile(lights > 0 ? lights : s.run.capture_count, s.run.noise_sigma, s.max_shift);
  throw UsageError("mode must be scanner or mobile");
}

Axis parse_axis(const std::string& a) {
  if (a == "x") return Axis::x;
  if (a == "y") return Axis::y;
  throw UsageError("axis must be x or y");
}

fs::path sibling_with_suffix(const fs::path& p, const std::string& suffix) {
  return p.parent_path() / (p.stem().string() + suffix + p.extension().string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Paper-surface authentication simulator and attack toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed_flag = 0;
  std::string config_path, out_path;
  app.add_option("--seed", seed_flag, "Run seed");
  app.add_option("--config", config_path, "TOML configuration file");
  app.add_option("--out", out_path, "Output file or directory");

  Settings s;
  auto settle = [&] {
    if (!config_path.empty()) load_config(config_path, s);
    if (app.count("--seed")) s.run.seed = seed_flag;
    s.surface.size = s.run.patch_size;
    s.run.validate();
  };

  // generate -------------------------------------------------------------
  auto* gen = app.add_subcommand("generate", "Synthesize a surface patch (.patch)");
  std::optional<double> gen_rough, gen_corr;
  gen->add_option("--roughness", gen_rough, "Slope standard deviation");
  gen->add_option("--correlation-length", gen_corr, "Slope autocorrelation length, pixels");
  gen->callback([&] {
    settle();
    if (gen_rough) s.surface.roughness = *gen_rough;
    if (gen_corr) s.surface.correlation_length = *gen_corr;
    announce_seed(s.run.seed);
    save_patch(require(out_path, "--out"), generate_patch(s.run.seed, s.surface));
  });

  // render ---------------------------------------------------------------
  auto* ren = app.add_subcommand("render", "Render a capture set from a patch");
  std::string ren_patch, ren_mode = "scanner";
  int ren_lights = 0;
  ren->add_option("--patch", ren_patch, "Input .patch")->required();
  ren->add_option("--mode", ren_mode, "scanner or mobile");
  ren->add_option("--lights", ren_lights, "Mobile light count (default capture_count)");
  ren->callback([&] {
    settle();
    announce_seed(s.run.seed);
    const auto proto = protocol_for(s, ren_mode, ren_lights);
    save_capture(require(out_path, "--out"), render(load_patch(ren_patch), proto.lights, proto.render, s.run.seed));
  });

  // align ----------------------------------------------------------------
  auto* ali = app.add_subcommand("align", "Register a capture set onto its first image");
  std::string ali_in;
  ali->add_option("--capture", ali_in, "Capture directory")->required();
  ali->callback([&] {
    settle();
    save_capture(require(out_path, "--out"), align(load_capture(ali_in)));
  });

  // extract --------------------------------------------------------------
  auto* ext = app.add_subcommand("extract", "Estimate the norm map (.nmap) of a capture set");
  std::string ext_in;
  ext->add_option("--capture", ext_in, "Capture directory")->required();
  ext->callback([&] {
    settle();
    save_nmap(require(out_path, "--out"), extract_feature(load_capture(ext_in)));
  });

  // enroll ---------------------------------------------------------------
  auto* enr = app.add_subcommand("enroll", "Add a template to a store");
  std::string enr_store, enr_id, enr_map, enr_source = "scanner";
  enr->add_option("--store", enr_store, "Store directory")->required();
  enr->add_option("--id", enr_id, "Record id")->required();
  enr->add_option("--map", enr_map, "Template .nmap")->required();
  enr->add_option("--source", enr_source, "scanner or mobile");
  enr->callback([&] {
    settle();
    auto store = TemplateStore::open(enr_store, StoreConfig{s.run.threshold});
    store->enroll(enr_id, load_nmap(enr_map), parse_source(enr_source));
  });

  // verify ---------------------------------------------------------------
  auto* ver = app.add_subcommand("verify", "Score a query map against a store");
  std::string ver_store, ver_map, ver_id;
  bool ver_search = false;
  ver->add_option("--store", ver_store, "Store directory")->required();
  ver->add_option("--map", ver_map, "Query .nmap")->required();
  ver->add_option("--id", ver_id, "Claimed identity");
  ver->add_flag("--search", ver_search, "Search the whole store");
  ver->callback([&] {
    settle();
    if (ver_id.empty() == !ver_search) throw UsageError("give exactly one of --id or --search");
    if (!fs::exists(fs::path(ver_store) / "config.json")) throw Error(Errc::storage_failure, "no store at " + ver_store);
    auto store = TemplateStore::open(ver_store);
    const auto q = load_nmap(ver_map);
    const auto res = ver_search ? store->verify(q) : store->verify(q, ver_id);
    Output out(out_path);
    out.os() << "id,corr_x,corr_y,min_corr,accepted\n"
             << res.matched_id.value_or("") << ',' << csv::num(res.score.corr_x) << ',' << csv::num(res.score.corr_y)
             << ',' << csv::num(res.score.min()) << ',' << (res.accepted ? 1 : 0) << '\n';
  });

  // attack ---------------------------------------------------------------
  auto* att = app.add_subcommand("attack", "Physical or digital attacks");
  att->require_subcommand(1);

  auto* phys = att->add_subcommand("phys", "Physical damage sweep (CSV)");
  std::string ph_patch, ph_kind = "scratch", ph_templ;
  std::vector<double> ph_strengths;
  int ph_trials = 10;
  phys->add_option("--patch", ph_patch, "Input .patch")->required();
  phys->add_option("--kind", ph_kind, "scratch|patch|scribble|crumple_random|crumple_fold|all");
  phys->add_option("--strength", ph_strengths, "Strength fraction(s); default 0.05 0.10 0.25 0.50 0.75");
  phys->add_option("--trials", ph_trials, "Trials per strength");
  phys->add_option("--template", ph_templ, "Enrolled .nmap (default: scanner capture of the patch)");
  phys->callback([&] {
    settle();
    announce_seed(s.run.seed);
    const auto patch = load_patch(ph_patch);
    const NormMap enrolled = ph_templ.empty()
                                 ? acquire(patch, Protocol::scanner(s.run.noise_sigma), derive_seed(s.run.seed, {0x454eULL}))
                                 : load_nmap(ph_templ);
    SweepSetup su;
    su.query = Protocol::mobile(s.run.capture_count, s.run.noise_sigma, s.max_shift);
    su.params = s.phys;
    su.seed = s.run.seed;
    std::vector<AttackKind> kinds;
    if (ph_kind == "all")
      kinds = {AttackKind::scratch, AttackKind::patch, AttackKind::scribble, AttackKind::crumple_random,
               AttackKind::crumple_fold};
    else
      kinds = {parse_attack_kind(ph_kind)};
    std::vector<SweepRow> rows;
    for (auto k : kinds) {
      std::vector<double> st = ph_strengths;
      if (st.empty()) st.assign(kAttackStrengths.begin(), kAttackStrengths.end());
      if (!is_area_attack(k)) st = {0.0};
      auto r = degradation_sweep(patch, enrolled, k, st, ph_trials, su);
      rows.insert(rows.end(), r.begin(), r.end());
    }
    Output out(out_path);
    csv::sweep(out.os(), rows);
  });

  auto* dig = att->add_subcommand("digital", "Score-driven forgery against one enrolled record");
  std::string dg_store, dg_target, dg_method = "nelder_mead", dg_codec, dg_codec_y, dg_trace, dg_forged,
                                   dg_axis = "x";
  std::optional<std::size_t> dg_budget;
  std::optional<double> dg_std;
  dig->add_option("--store", dg_store, "Store directory")->required();
  dig->add_option("--target-id", dg_target, "Record to forge")->required();
  dig->add_option("--method", dg_method, "baseline|latent_greedy|nelder_mead|powell|conjugate_gradient");
  dig->add_option("--budget", dg_budget, "Oracle evaluations per component");
  dig->add_option("--codec", dg_codec, "x-component (or joint) codec .lpc");
  dig->add_option("--codec-y", dg_codec_y, "y-component codec .lpc (for --axis both)");
  dig->add_option("--axis", dg_axis, "x, y or both");
  dig->add_option("--trace", dg_trace, "Trace CSV (eval_index,rho_best)");
  dig->add_option("--forged", dg_forged, "Write the forged map (.nmap)");
  dig->add_option("--holdout-std", dg_std, "Baseline start/δ scale (default from codec or 0.08)");
  dig->callback([&] {
    settle();
    announce_seed(s.run.seed);
    const Method method = parse_method(dg_method);
    if (!fs::exists(fs::path(dg_store) / "config.json")) throw Error(Errc::storage_failure, "no store at " + dg_store);
    auto store = TemplateStore::open(dg_store);
    const std::size_t budget = dg_budget.value_or(s.budget);

    ComponentCodecs codecs;
    bool have_codecs = false;
    if (!dg_codec.empty()) {
      auto c = load_lpc(dg_codec);
      if (c.layout() == CodecLayout::joint) throw UsageError("attacks use per-component codecs (layout x / y)");
      (c.layout() == CodecLayout::x ? codecs.x : codecs.y) = std::move(c);
      if (!dg_codec_y.empty()) {
        auto cy = load_lpc(dg_codec_y);
        (cy.layout() == CodecLayout::x ? codecs.x : codecs.y) = std::move(cy);
      }
      have_codecs = true;
    }
    if (uses_codec(method) && !have_codecs) throw UsageError("--codec is required for latent-space methods");

    double sd = 0.08;
    if (dg_std)
      sd = *dg_std;
    else if (have_codecs) {
      const auto& c = codecs.x.d() ? codecs.x : codecs.y;
      sd = std::sqrt(c.total_variance() / static_cast<double>(c.d()));
    }
    auto setup = make_forge_setup(have_codecs ? &codecs : nullptr, sd, budget);
    if (have_codecs) setup.latent = default_latent_params(codecs.x.d() ? codecs.x : codecs.y, budget);

    std::vector<AttackTrace> traces;
    NormMap forged;
    if (dg_axis == "both") {
      if (uses_codec(method) && (codecs.x.d() == 0 || codecs.y.d() == 0))
        throw UsageError("--axis both needs an x codec and a y codec");
      auto res = forge(*store, dg_target, method, setup, s.run.seed);
      traces = {res.x, res.y};
      forged = res.forged;
    } else {
      const Axis axis = parse_axis(dg_axis);
      if (uses_codec(method) && (axis == Axis::x ? codecs.x.d() : codecs.y.d()) == 0)
        throw UsageError("no codec for the requested axis");
      const auto rec = store->record(dg_target);
      NormMap start;
      if (method == Method::baseline)
        start = random_start(rec.templ.width(), rec.templ.height(), sd, derive_seed(s.run.seed, {0}));
      else
        start = NormMap::zeros(rec.templ.width(), rec.templ.height());
      traces = {attack_component(*store, dg_target, method, axis, start, setup, derive_seed(s.run.seed, {1}))};
      forged = traces.front().forged;
    }
    if (!dg_trace.empty()) {
      for (std::size_t i = 0; i < traces.size(); ++i) {
        const fs::path p = i == 0 ? fs::path(dg_trace) : sibling_with_suffix(dg_trace, "_y");
        std::ofstream os(p, std::ios::trunc);
        if (!os) throw Error(Errc::storage_failure, "cannot write " + p.string());
        csv::trace(os, traces[i]);
      }
    }
    if (!dg_forged.empty()) save_nmap(dg_forged, forged);
    Output out(out_path);
    out.os() << "target_id,method,axis,function_evals,budget,best_rho,success\n";
    for (const auto& t : traces)
      out.os() << dg_target << ',' << to_string(method) << ',' << to_string(t.axis) << ',' << t.function_evals << ','
               << t.budget << ',' << csv::num(t.best_rho()) << ',' << (t.success ? 1 : 0) << '\n';
  });

  // codec fit ------------------------------------------------------------
  auto* cod = app.add_subcommand("codec", "Latent codec tools");
  cod->require_subcommand(1);
  auto* fit_cmd = cod->add_subcommand("fit", "Fit a PCA codec (.lpc) on holdout maps");
  std::vector<std::string> fit_maps;
  std::string fit_dir, fit_layout = "x";
  std::optional<double> fit_var;
  fit_cmd->add_option("--maps", fit_maps, "Holdout .nmap files");
  fit_cmd->add_option("--holdout-dir", fit_dir, "Directory of holdout .nmap files");
  fit_cmd->add_option("--layout", fit_layout, "x, y or joint");
  fit_cmd->add_option("--variance", fit_var, "Cumulative variance target in (0,1]");
  fit_cmd->callback([&] {
    settle();
    std::vector<std::string> files = fit_maps;
    if (!fit_dir.empty()) {
      std::vector<std::string> found;
      for (const auto& e : fs::directory_iterator(fit_dir))
        if (e.path().extension() == ".nmap") found.push_back(e.path().string());
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    }
    if (files.empty()) throw UsageError("give --maps or --holdout-dir");
    std::vector<NormMap> maps;
    for (const auto& f : files) maps.push_back(load_nmap(f));
    CodecLayout layout = fit_layout == "x"       ? CodecLayout::x
                         : fit_layout == "y"     ? CodecLayout::y
                         : fit_layout == "joint" ? CodecLayout::joint
                                                 : throw UsageError("layout must be x, y or joint");
    const auto codec = fit(maps, fit_var.value_or(s.variance_target), layout);
    save_lpc(require(out_path, "--out"), codec);
    std::cerr << "m=" << codec.m() << " explained=" << csv::num(codec.explained_fraction(codec.m())) << '\n';
  });

  // scenario -------------------------------------------------------------
  auto* scn = app.add_subcommand("scenario", "Write a holdout set, codecs and a target store for digital attacks");
  scn->callback([&] {
    settle();
    announce_seed(s.run.seed);
    const fs::path dir = require(out_path, "--out");
    if (fs::exists(dir / "store")) throw Error(Errc::storage_failure, "scenario already exists at " + dir.string());
    ScenarioParams sp;
    sp.stock = s.stock;
    sp.surface = s.surface;
    sp.holdout_sheets = s.holdout_sheets;
    sp.scans_per_sheet = s.scans_per_sheet;
    sp.targets = s.targets;
    sp.variance_target = s.variance_target;
    sp.noise_sigma = s.run.noise_sigma;
    sp.threshold = s.run.threshold;
    sp.seed = s.run.seed;
    auto sc = make_scenario(sp);
    fs::create_directories(dir / "holdout");
    for (std::size_t i = 0; i < sc.holdout.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "hold_%03zu.nmap", i);
      save_nmap(dir / "holdout" / name, sc.holdout[i]);
    }
    save_lpc(dir / "codec_x.lpc", sc.codecs.x);
    save_lpc(dir / "codec_y.lpc", sc.codecs.y);
    auto store = TemplateStore::open(dir / "store", StoreConfig{s.run.threshold});
    for (const auto& id : sc.target_ids) store->enroll(id, sc.store->get(id), SourceTag::scanner);
  });

  // report ---------------------------------------------------------------
  auto* rep = app.add_subcommand("report", "Tables and histograms (CSV)");
  rep->require_subcommand(1);

  auto* hist = rep->add_subcommand("hist", "Matched/unmatched score histogram");
  int h_pairs = 50, h_bins = 20;
  std::string h_attack = "none";
  double h_strength = 0.25;
  hist->add_option("--pairs", h_pairs, "Number of sheets");
  hist->add_option("--bins", h_bins, "Histogram bins over [-1, 1]");
  hist->add_option("--attack", h_attack, "none or an attack kind applied before the matched query");
  hist->add_option("--strength", h_strength, "Attack strength");
  hist->callback([&] {
    settle();
    announce_seed(s.run.seed);
    if (h_pairs < 2) throw UsageError("--pairs must be at least 2");
    std::optional<AttackKind> kind;
    if (h_attack != "none") kind = parse_attack_kind(h_attack);
    const auto n = static_cast<std::size_t>(h_pairs);
    struct Pair {
      NormMap templ, query;
    };
    const auto data = parallel_map<Pair>(n, [&](std::size_t i) {
      const auto base = derive_seed(s.run.seed, {0x48495354ULL, i});
      auto patch = generate_patch(derive_seed(base, {0}), s.surface);
      Pair p;
      p.templ = acquire(patch, Protocol::scanner(s.run.noise_sigma), derive_seed(base, {1}));
      if (kind) patch = apply_attack(patch, {*kind, h_strength, derive_seed(base, {2})}, s.phys).patch;
      try {
        p.query = acquire(patch, Protocol::mobile(s.run.capture_count, s.run.noise_sigma, s.max_shift),
                          derive_seed(base, {3}));
      } catch (const Error& e) {
        if (e.code() != Errc::alignment_failed) throw;
      }
      return p;
    });
    std::vector<double> matched, unmatched;
    for (std::size_t i = 0; i < n; ++i) {
      if (data[i].query.empty()) continue;
      matched.push_back(score(data[i].query, data[i].templ).corr_x);
      unmatched.push_back(score(data[i].query, data[(i + 1) % n].templ).corr_x);
    }
    Output out(out_path);
    csv::histogram(out.os(), histogram_report(matched, unmatched, h_bins));
  });

  auto* swp = rep->add_subcommand("sweep", "Full physical-attack table on one generated sheet");
  int sw_trials = 10;
  swp->add_option("--trials", sw_trials, "Trials per strength");
  swp->callback([&] {
    settle();
    announce_seed(s.run.seed);
    const auto patch = generate_patch(s.run.seed, s.surface);
    const auto enrolled = acquire(patch, Protocol::scanner(s.run.noise_sigma), derive_seed(s.run.seed, {0x454eULL}));
    SweepSetup su;
    su.query = Protocol::mobile(s.run.capture_count, s.run.noise_sigma, s.max_shift);
    su.params = s.phys;
    su.seed = s.run.seed;
    std::vector<SweepRow> rows;
    const double none[1] = {0.0};
    auto base = degradation_sweep(patch, enrolled, AttackKind::scratch, none, sw_trials, su);
    rows.insert(rows.end(), base.begin(), base.end());
    for (auto k : {AttackKind::scratch, AttackKind::patch, AttackKind::scribble}) {
      auto r = degradation_sweep(patch, enrolled, k, kAttackStrengths, sw_trials, su);
      rows.insert(rows.end(), r.begin(), r.end());
    }
    for (auto k : {AttackKind::crumple_random, AttackKind::crumple_fold}) {
      auto r = degradation_sweep(patch, enrolled, k, none, sw_trials, su);
      rows.insert(rows.end(), r.begin(), r.end());
    }
    Output out(out_path);
    csv::sweep(out.os(), rows);
  });

  auto* rdg = rep->add_subcommand("digital", "Success-rate table over a fresh scenario");
  std::vector<std::string> rd_methods;
  int rd_trials = 1;
  std::optional<std::size_t> rd_budget;
  rdg->add_option("--methods", rd_methods, "Methods (default: all)");
  rdg->add_option("--trials", rd_trials, "Trials per target");
  rdg->add_option("--budget", rd_budget, "Evaluation budget per run");
  rdg->callback([&] {
    settle();
    announce_seed(s.run.seed);
    ScenarioParams sp;
    sp.stock = s.stock;
    sp.surface = s.surface;
    sp.holdout_sheets = s.holdout_sheets;
    sp.scans_per_sheet = s.scans_per_sheet;
    sp.targets = s.targets;
    sp.variance_target = s.variance_target;
    sp.noise_sigma = s.run.noise_sigma;
    sp.threshold = s.run.threshold;
    sp.seed = s.run.seed;
    auto sc = make_scenario(sp);
    std::vector<Method> methods;
    for (const auto& m : rd_methods) methods.push_back(parse_method(m));
    if (methods.empty()) methods.assign(kAllMethods.begin(), kAllMethods.end());
    const auto setup = make_forge_setup(&sc.codecs, sc.holdout_std, rd_budget.value_or(s.budget));
    const auto table = success_rate_table(*sc.store, sc.target_ids, methods, setup, rd_trials, s.run.seed);
    Output out(out_path);
    csv::success_table(out.os(), table);
  });

  // collide --------------------------------------------------------------
  auto* col = app.add_subcommand("collide", "Chance-collision probability (log10) with optional Monte-Carlo check");
  std::uint64_t c_d = 40000;
  double c_eps = 0.3, c_r = 1.0;
  std::uint64_t c_samples = 0;
  col->add_option("--d", c_d, "Dimension count");
  col->add_option("--eps", c_eps, "Similarity radius");
  col->add_option("--radius", c_r, "Sampling-ball radius");
  col->add_option("--mc-samples", c_samples, "Monte-Carlo samples (0 = skip)");
  col->callback([&] {
    settle();
    if (c_samples > 0) announce_seed(s.run.seed);
    const double lp = collision_log10_probability({c_d, c_eps, c_r});
    const auto sci = to_scientific(lp);
    Output out(out_path);
    out.os() << "d,eps,radius,log10_p,mantissa,exponent,mc_p,mc_sigma,mc_hits,mc_samples\n";
    out.os() << c_d << ',' << csv::num(c_eps) << ',' << csv::num(c_r) << ',' << csv::num(lp) << ','
             << csv::num(sci.mantissa) << ',' << sci.exponent;
    if (c_samples > 0) {
      const auto mc = collision_monte_carlo(c_d, c_eps, c_r, c_samples, s.run.seed);
      out.os() << ',' << csv::num(mc.p) << ',' << csv::num(mc.sigma) << ',' << mc.hits << ',' << mc.samples;
    } else {
      out.os() << ",,,,";
    }
    out.os() << '\n';
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
