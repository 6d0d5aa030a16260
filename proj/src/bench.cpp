#include "sbo/bench.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "sbo/voi.hpp"

namespace sbo::bench {

using nlohmann::json;

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

json sbo_config_to_json(const SBOConfig& c) {
  return json{{"n0", c.n0},
              {"N", c.N},
              {"M", c.M},
              {"restarts", c.restarts},
              {"fit_restarts", c.fit_restarts},
              {"disc_per_dim", c.disc_per_dim},
              {"disc_max_total", c.disc_max_total},
              {"refit_every", c.refit_every}};
}

SBOConfig sbo_config_from_json(const json& j) {
  SBOConfig c;
  c.n0 = j.at("n0").get<int>();
  c.N = j.at("N").get<int>();
  c.M = j.at("M").get<int>();
  c.restarts = j.at("restarts").get<int>();
  c.fit_restarts = j.at("fit_restarts").get<int>();
  c.disc_per_dim = j.at("disc_per_dim").get<int>();
  c.disc_max_total = j.at("disc_max_total").get<int>();
  c.refit_every = j.at("refit_every").get<int>();
  return c;
}

}  // namespace

std::string ExperimentConfig::to_json_string() const {
  json j;
  j["version"] = version;
  j["problem"]["family"] = family;
  if (family == "gp_sampled") {
    j["problem"]["A_ratio"] = gp.A_ratio;
    j["problem"]["beta"] = gp.beta;
    j["problem"]["grid"] = gp.grid;
  } else if (family == "bikeshare") {
    j["problem"]["stations"] = bikeshare.stations;
    j["problem"]["groups"] = bikeshare.groups;
    j["problem"]["docks_per_station"] = bikeshare.docks_per_station;
    j["problem"]["budget"] = bikeshare.budget;
    j["problem"]["total_demand"] = bikeshare.total_demand;
    j["problem"]["horizon_minutes"] = bikeshare.horizon_minutes;
    j["problem"]["mean_trip_minutes"] = bikeshare.mean_trip_minutes;
    j["problem"]["instance_seed"] = bikeshare.seed;
    j["problem"]["check_conservation"] = bikeshare.check_conservation;
  }
  j["algorithms"] = algorithms;
  j["run"] = sbo_config_to_json(run);
  j["replications"] = replications;
  j["output_dir"] = output_dir;
  j["master_seed"] = master_seed;
  j["scoring_scenarios"] = scoring_scenarios;
  return j.dump(2) + "\n";
}

ExperimentConfig ExperimentConfig::from_json_string(const std::string& text) {
  json j = json::parse(text);
  ExperimentConfig c;
  c.version = j.at("version").get<int>();
  if (c.version != 1)
    throw std::runtime_error("unsupported config version " +
                             std::to_string(c.version));
  c.family = j.at("problem").at("family").get<std::string>();
  if (c.family == "gp_sampled") {
    const auto& p = j.at("problem");
    c.gp.A_ratio = p.at("A_ratio").get<double>();
    c.gp.beta = p.at("beta").get<double>();
    c.gp.grid = p.at("grid").get<int>();
  } else if (c.family == "bikeshare") {
    const auto& p = j.at("problem");
    c.bikeshare.stations = p.at("stations").get<int>();
    c.bikeshare.groups = p.at("groups").get<int>();
    c.bikeshare.docks_per_station = p.at("docks_per_station").get<int>();
    c.bikeshare.budget = p.at("budget").get<double>();
    c.bikeshare.total_demand = p.at("total_demand").get<double>();
    c.bikeshare.horizon_minutes = p.at("horizon_minutes").get<double>();
    c.bikeshare.mean_trip_minutes = p.at("mean_trip_minutes").get<double>();
    c.bikeshare.seed = p.at("instance_seed").get<std::uint64_t>();
    c.bikeshare.check_conservation = p.at("check_conservation").get<bool>();
  } else if (c.family != "analytic") {
    throw std::runtime_error("unknown problem family: " + c.family);
  }
  c.algorithms = j.at("algorithms").get<std::vector<std::string>>();
  c.run = sbo_config_from_json(j.at("run"));
  c.replications = j.at("replications").get<int>();
  c.output_dir = j.at("output_dir").get<std::string>();
  c.master_seed = j.at("master_seed").get<std::uint64_t>();
  c.scoring_scenarios = j.at("scoring_scenarios").get<int>();
  if (c.replications < 1)
    throw std::runtime_error("replications must be >= 1");
  if (c.algorithms.empty())
    throw std::runtime_error("algorithms list must be nonempty");
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_string(ss.str());
}

void ExperimentConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config: " + path);
  out << to_json_string();
}

double compute_normalized_difference(double g_sbo, double g_kg) {
  if (std::fabs(g_kg) < 1e-12)
    return std::numeric_limits<double>::quiet_NaN();
  return (g_sbo - g_kg) / std::fabs(g_kg);
}

Problem make_problem(const ExperimentConfig& config, int replication) {
  if (config.family == "analytic") return analytic_problem();
  if (config.family == "gp_sampled") {
    GPSampledSpec spec = config.gp;
    spec.seed = Rng::derive(config.master_seed, 0xF00DULL,
                            static_cast<std::uint64_t>(replication));
    return gp_sampled_problem(spec);
  }
  if (config.family == "bikeshare") {
    BikeShareConfig bs = config.bikeshare;
    bs.seed = Rng::derive(config.master_seed, 0xB15EULL, config.bikeshare.seed);
    return bikeshare_problem(bs);
  }
  throw std::runtime_error("unknown problem family: " + config.family);
}

namespace {

// Fixed scoring set for oracle-less problems: the same (w, z) scenarios for
// every algorithm, iteration, and replication.
struct CrnScorer {
  std::vector<std::vector<double>> ws;
  std::vector<std::uint64_t> seeds;

  CrnScorer(const Problem& p, std::uint64_t master, int n) {
    ws.reserve(n);
    seeds.reserve(n);
    for (int s = 0; s < n; ++s) {
      ws.push_back(p.sample_w(Rng::derive(master, 0xCCULL, s)));
      seeds.push_back(Rng::derive(master, 0xCDULL, s));
    }
  }

  double score(const Problem& p, std::span<const double> x) const {
    double sum = 0.0;
    for (std::size_t s = 0; s < ws.size(); ++s)
      sum += p.evaluate(x, ws[s], 1, seeds[s]).y;
    return sum / ws.size();
  }
};

std::uint64_t algo_stream(const std::string& algo) {
  if (algo == "sbo") return 11;
  if (algo == "kg") return 12;
  if (algo == "ei") return 13;
  throw std::runtime_error("unknown algorithm: " + algo);
}

std::vector<MetricRow> run_one(const ExperimentConfig& config,
                               const std::string& algo, int rep,
                               const CrnScorer* scorer) {
  std::vector<MetricRow> rows;
  try {
    Problem problem = make_problem(config, rep);
    SBOConfig cfg = config.run;
    cfg.seed = Rng::derive(config.master_seed, algo_stream(algo),
                           static_cast<std::uint64_t>(rep));
    RunRecord rec;
    if (algo == "sbo")
      rec = run_sbo(problem, cfg);
    else if (algo == "kg")
      rec = run_kg(problem, cfg);
    else
      rec = run_ei(problem, cfg);

    double cum_ms = 0.0;
    for (const IterationRecord& it : rec.iterations) {
      cum_ms += it.wall_ms;
      MetricRow row;
      row.algorithm = algo;
      row.replication = rep;
      row.iteration = it.iteration;
      row.g_value = problem.oracle_g
                        ? problem.oracle_g(it.recommendation)
                        : scorer->score(problem, it.recommendation);
      row.wall_ms = cum_ms;
      rows.push_back(row);
    }
  } catch (const std::exception& e) {
    MetricRow row;
    row.algorithm = algo;
    row.replication = rep;
    row.iteration = -1;
    row.g_value = std::numeric_limits<double>::quiet_NaN();
    row.status = std::string("failed:") + e.what();
    rows.assign(1, row);
  }
  return rows;
}

struct Series {
  std::string label;
  std::vector<double> x, mean, lo, hi;
};

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                          "#9467bd", "#ff7f0e", "#8c564b"};

std::string svg_plot(const std::string& title, const std::string& xlabel,
                     const std::string& ylabel,
                     const std::vector<Series>& series) {
  const double W = 720, H = 480, ml = 72, mr = 24, mt = 40, mb = 56;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const Series& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min({ymin, s.lo[i], s.mean[i]});
      ymax = std::max({ymax, s.hi[i], s.mean[i]});
    }
  if (xmin > xmax) {
    xmin = 0;
    xmax = 1;
  }
  if (ymin > ymax) {
    ymin = 0;
    ymax = 1;
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) {
    ymax += 0.5;
    ymin -= 0.5;
  }
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;
  auto px = [&](double x) {
    return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr);
  };
  auto py = [&](double y) {
    return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb);
  };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
      << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << " " << H
      << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"16\">"
      << title << "</text>\n";
  // axes
  out << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr
      << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
      << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double xv = xmin + t * (xmax - xmin) / 5;
    const double yv = ymin + t * (ymax - ymin) / 5;
    out << "<line x1=\"" << px(xv) << "\" y1=\"" << H - mb << "\" x2=\""
        << px(xv) << "\" y2=\"" << H - mb + 5 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << px(xv) << "\" y=\"" << H - mb + 20
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"11\">"
        << fmt_short(xv) << "</text>\n";
    out << "<line x1=\"" << ml - 5 << "\" y1=\"" << py(yv) << "\" x2=\"" << ml
        << "\" y2=\"" << py(yv) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << ml - 8 << "\" y=\"" << py(yv) + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"11\">"
        << fmt_short(yv) << "</text>\n";
  }
  out << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\">"
      << xlabel << "</text>\n";
  out << "<text x=\"18\" y=\"" << (mt + H - mb) / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\" transform=\"rotate(-90 18 "
      << (mt + H - mb) / 2 << ")\">" << ylabel << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    const char* color = kPalette[k % 6];
    if (s.x.empty()) continue;
    // confidence band
    out << "<polygon fill=\"" << color << "\" fill-opacity=\"0.15\" "
           "stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      out << px(s.x[i]) << "," << py(s.hi[i]) << " ";
    for (std::size_t i = s.x.size(); i-- > 0;)
      out << px(s.x[i]) << "," << py(s.lo[i]) << " ";
    out << "\"/>\n";
    // mean curve
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      out << px(s.x[i]) << "," << py(s.mean[i]) << " ";
    out << "\"/>\n";
    // legend
    const double ly = mt + 16 + 18 * k;
    out << "<line x1=\"" << W - mr - 130 << "\" y1=\"" << ly << "\" x2=\""
        << W - mr - 106 << "\" y2=\"" << ly << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << W - mr - 100 << "\" y=\"" << ly + 4
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.label
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

// mean and half-width of the 95% normal-approximation interval
std::pair<double, double> mean_ci(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double m = 0.0;
  for (double x : v) m += x;
  m /= v.size();
  if (v.size() < 2) return {m, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double se = std::sqrt(ss / (v.size() - 1) / v.size());
  return {m, 1.96 * se};
}

std::vector<Series> curves_from_rows(const std::vector<MetricRow>& rows) {
  // preserve first-appearance algorithm order
  std::vector<std::string> algos;
  for (const MetricRow& r : rows)
    if (std::find(algos.begin(), algos.end(), r.algorithm) == algos.end())
      algos.push_back(r.algorithm);
  std::vector<Series> out;
  for (const std::string& algo : algos) {
    std::map<int, std::vector<double>> by_iter;
    for (const MetricRow& r : rows)
      if (r.algorithm == algo && r.status == "ok" && r.iteration >= 0)
        by_iter[r.iteration].push_back(r.g_value);
    Series s;
    s.label = algo;
    for (const auto& [iter, vals] : by_iter) {
      const auto [m, hw] = mean_ci(vals);
      s.x.push_back(iter);
      s.mean.push_back(m);
      s.lo.push_back(m - hw);
      s.hi.push_back(m + hw);
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

void write_csv(const std::string& path, const std::vector<MetricRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "algorithm,replication,iteration,g_value,norm_diff,wall_ms,status\n";
  for (const MetricRow& r : rows) {
    out << r.algorithm << ',' << r.replication << ',' << r.iteration << ','
        << fmt_double(r.g_value) << ',';
    if (r.norm_diff_undefined)
      out << "undefined";
    else if (r.has_norm_diff)
      out << fmt_double(r.norm_diff);
    out << ',';
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.3f", r.wall_ms);
    out << buf << ',' << r.status << '\n';
  }
}

std::vector<MetricRow> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("empty metrics file: " + path);
  std::vector<MetricRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t pos = 0;
    for (int k = 0; k < 6; ++k) {
      const std::size_t c = line.find(',', pos);
      if (c == std::string::npos)
        throw std::runtime_error("malformed CSV row: " + line);
      f.push_back(line.substr(pos, c - pos));
      pos = c + 1;
    }
    f.push_back(line.substr(pos));
    MetricRow r;
    r.algorithm = f[0];
    r.replication = std::stoi(f[1]);
    r.iteration = std::stoi(f[2]);
    r.g_value = std::stod(f[3]);
    if (f[4] == "undefined") {
      r.norm_diff_undefined = true;
    } else if (!f[4].empty()) {
      r.has_norm_diff = true;
      r.norm_diff = std::stod(f[4]);
    }
    r.wall_ms = std::stod(f[5]);
    r.status = f[6];
    rows.push_back(std::move(r));
  }
  return rows;
}

ExperimentResult run_experiment(const ExperimentConfig& config,
                                int parallelism) {
  if (config.replications < 1)
    throw std::invalid_argument("replications must be >= 1");
  if (config.algorithms.empty())
    throw std::invalid_argument("algorithms list must be nonempty");
  for (const std::string& a : config.algorithms) (void)algo_stream(a);

  std::filesystem::create_directories(config.output_dir);

  std::unique_ptr<CrnScorer> scorer;
  Problem probe = make_problem(config, 0);
  if (!probe.oracle_g)
    scorer = std::make_unique<CrnScorer>(probe, config.master_seed,
                                         config.scoring_scenarios);

  struct Task {
    std::string algo;
    int rep;
  };
  std::vector<Task> tasks;
  for (const std::string& algo : config.algorithms)
    for (int r = 0; r < config.replications; ++r) tasks.push_back({algo, r});
  std::vector<std::vector<MetricRow>> slots(tasks.size());

  const int threads =
      std::max(1, std::min<int>(parallelism, static_cast<int>(tasks.size())));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      slots[i] = run_one(config, tasks[i].algo, tasks[i].rep, scorer.get());
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  ExperimentResult result;
  for (std::vector<MetricRow>& slot : slots)
    for (MetricRow& row : slot) {
      if (row.status != "ok") result.all_ok = false;
      result.rows.push_back(std::move(row));
    }

  // normalized difference on SBO rows when a KG run exists for the same
  // (replication, iteration)
  const bool have_kg =
      std::find(config.algorithms.begin(), config.algorithms.end(), "kg") !=
      config.algorithms.end();
  if (have_kg) {
    std::map<std::pair<int, int>, double> kg_g;
    for (const MetricRow& r : result.rows)
      if (r.algorithm == "kg" && r.status == "ok")
        kg_g[{r.replication, r.iteration}] = r.g_value;
    for (MetricRow& r : result.rows) {
      if (r.algorithm != "sbo" || r.status != "ok") continue;
      auto it = kg_g.find({r.replication, r.iteration});
      if (it == kg_g.end()) continue;
      const double nd = compute_normalized_difference(r.g_value, it->second);
      if (std::isnan(nd))
        r.norm_diff_undefined = true;
      else {
        r.has_norm_diff = true;
        r.norm_diff = nd;
      }
    }
  }

  result.csv_path = config.output_dir + "/metrics.csv";
  write_csv(result.csv_path, result.rows);
  config.save(config.output_dir + "/config.json");

  const std::string plot_path = config.output_dir + "/g_curve.svg";
  write_text_file(plot_path,
                  svg_plot("mean G(x*) vs iteration (" + config.family + ")",
                           "iteration", "G(recommendation)",
                           curves_from_rows(result.rows)));
  result.plot_paths.push_back(plot_path);
  return result;
}

std::vector<std::string> plot_metrics(const std::string& csv_path,
                                      const std::string& output_dir) {
  const std::vector<MetricRow> rows = read_csv(csv_path);
  std::filesystem::create_directories(output_dir);
  const std::string path = output_dir + "/g_curve.svg";
  write_text_file(path, svg_plot("mean G(x*) vs iteration", "iteration",
                                 "G(recommendation)", curves_from_rows(rows)));
  return {path};
}

SweepResult run_sweep(const ExperimentConfig& base,
                      const std::vector<double>& A_ratios,
                      const std::vector<double>& log_betas, int parallelism) {
  SweepResult sweep;
  ExperimentConfig cell = base;
  cell.family = "gp_sampled";
  if (std::find(cell.algorithms.begin(), cell.algorithms.end(), "sbo") ==
      cell.algorithms.end())
    cell.algorithms.push_back("sbo");
  if (std::find(cell.algorithms.begin(), cell.algorithms.end(), "kg") ==
      cell.algorithms.end())
    cell.algorithms.push_back("kg");

  std::filesystem::create_directories(base.output_dir);
  for (double A : A_ratios)
    for (double lb : log_betas) {
      cell.gp.A_ratio = A;
      cell.gp.beta = std::exp(lb);
      cell.output_dir = base.output_dir + "/A" + fmt_short(A) + "_logbeta" +
                        fmt_short(lb);
      const ExperimentResult res = run_experiment(cell, parallelism);
      SweepResult::Cell c;
      c.A_ratio = A;
      c.log_beta = lb;
      c.ok = res.all_ok;
      std::vector<double> finals;
      for (const MetricRow& r : res.rows)
        if (r.algorithm == "sbo" && r.status == "ok" &&
            r.iteration == cell.run.N && r.has_norm_diff)
          finals.push_back(r.norm_diff);
      const auto [m, hw] = mean_ci(finals);
      c.mean_norm_diff = m;
      c.ci_lo = m - hw;
      c.ci_hi = m + hw;
      c.n = static_cast<int>(finals.size());
      if (!c.ok) sweep.all_ok = false;
      sweep.cells.push_back(c);
    }

  sweep.summary_csv = base.output_dir + "/sweep_summary.csv";
  {
    std::ofstream out(sweep.summary_csv, std::ios::binary);
    out << "A_ratio,log_beta,mean_norm_diff,ci_lo,ci_hi,n,status\n";
    for (const SweepResult::Cell& c : sweep.cells)
      out << fmt_double(c.A_ratio) << ',' << fmt_double(c.log_beta) << ','
          << fmt_double(c.mean_norm_diff) << ',' << fmt_double(c.ci_lo) << ','
          << fmt_double(c.ci_hi) << ',' << c.n << ','
          << (c.ok ? "ok" : "failed") << '\n';
  }

  std::vector<Series> series;
  for (double A : A_ratios) {
    Series s;
    s.label = "A=" + fmt_short(A);
    for (const SweepResult::Cell& c : sweep.cells)
      if (c.A_ratio == A) {
        s.x.push_back(c.log_beta);
        s.mean.push_back(c.mean_norm_diff);
        s.lo.push_back(c.ci_lo);
        s.hi.push_back(c.ci_hi);
      }
    series.push_back(std::move(s));
  }
  sweep.plot_path = base.output_dir + "/sweep_norm_diff.svg";
  write_text_file(sweep.plot_path,
                  svg_plot("normalized difference (SBO vs KG)", "log beta",
                           "(G_SBO - G_KG) / |G_KG|", series));
  return sweep;
}

}  // namespace sbo::bench
