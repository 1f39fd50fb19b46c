#include "netstate/scenario_generator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "netstate/csv.hpp"
#include "netstate/parallel.hpp"
#include "netstate/rng.hpp"

namespace netstate {

void GeneratorConfig::validate() const {
  if (grid_rows < 3 || grid_cols < 3)
    throw ConfigError("generator: grid must be at least 3x3");
  if (n_steps < 2) throw ConfigError("generator: n_steps must be >= 2");
  if (step_minutes <= 0) throw ConfigError("generator: step_minutes must be positive");
  if (n_itd < 1 || n_atd < 1 || n_etd < 1)
    throw ConfigError("generator: scenario counts must be >= 1");
  if (noise_std < 0.0) throw ConfigError("generator: noise_std must be >= 0");
  for (double d : {depth_itd, depth_atd, depth_etd})
    if (!(d > 0.0) || !(d < 1.0))
      throw ConfigError("generator: congestion depths must lie in (0,1)");
  if (peak_step <= 0 || peak_step >= n_steps)
    throw ConfigError("generator: peak_step must lie inside the sequence");
  if (etd_ramp_steps < 1 || etd_ramp_steps >= n_steps)
    throw ConfigError("generator: etd_ramp_steps must lie inside the sequence");
  if (!(atd_severity_min > 0.0) || atd_severity_max < atd_severity_min)
    throw ConfigError("generator: invalid severity range");
}

namespace {

struct DirectedLink {
  int from_node;
  int to_node;
  int twin;  // opposite direction on the same edge
};

// Node grid with a one-way pair per undirected edge. Link order: node-major
// scan, east edge then south edge, forward link then backward link.
std::vector<DirectedLink> grid_links(int rows, int cols) {
  std::vector<DirectedLink> links;
  auto node = [cols](int r, int c) { return r * cols + c; };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols) {
        const int a = node(r, c), b = node(r, c + 1);
        const int i = static_cast<int>(links.size());
        links.push_back({a, b, i + 1});
        links.push_back({b, a, i});
      }
      if (r + 1 < rows) {
        const int a = node(r, c), b = node(r + 1, c);
        const int i = static_cast<int>(links.size());
        links.push_back({a, b, i + 1});
        links.push_back({b, a, i});
      }
    }
  }
  return links;
}

// Smooth plateau: 1 inside r0, raised-cosine taper to 0 at r1.
double taper(double d, double r0, double r1) {
  if (d <= r0) return 1.0;
  if (d >= r1) return 0.0;
  const double t = (d - r0) / (r1 - r0);
  const double c = std::cos(0.5 * std::numbers::pi * t);
  return c * c;
}

}  // namespace

GridNetwork generate_grid(const GeneratorConfig& config) {
  config.validate();
  const int rows = config.grid_rows;
  const int cols = config.grid_cols;
  const auto links = grid_links(rows, cols);
  const auto n = static_cast<std::int32_t>(links.size());

  GridNetwork grid;
  grid.topology.n_links = n;
  grid.topology.upstream.resize(static_cast<std::size_t>(n));
  grid.topology.downstream.resize(static_cast<std::size_t>(n));
  grid.topology.original_ids.resize(static_cast<std::size_t>(n));
  grid.link_x.resize(static_cast<std::size_t>(n));
  grid.link_y.resize(static_cast<std::size_t>(n));

  // Links flowing into / out of each node, for neighbor resolution.
  std::vector<std::vector<int>> into(static_cast<std::size_t>(rows * cols));
  std::vector<std::vector<int>> out_of(static_cast<std::size_t>(rows * cols));
  for (int i = 0; i < n; ++i) {
    into[static_cast<std::size_t>(links[static_cast<std::size_t>(i)].to_node)].push_back(i);
    out_of[static_cast<std::size_t>(links[static_cast<std::size_t>(i)].from_node)].push_back(i);
  }

  auto coord = [&](int node_id, double& x, double& y) {
    const int r = node_id / cols;
    const int c = node_id % cols;
    x = cols > 1 ? static_cast<double>(c) / (cols - 1) : 0.5;
    y = rows > 1 ? static_cast<double>(r) / (rows - 1) : 0.5;
  };

  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const DirectedLink& link = links[ui];
    grid.topology.original_ids[ui] = i;
    // Upstream: links feeding the source node; downstream: links leaving the
    // sink node. The opposite direction of the same street carries the
    // opposite flow orientation and is excluded.
    for (int j : into[static_cast<std::size_t>(link.from_node)])
      if (j != link.twin && j != i) grid.topology.upstream[ui].push_back(j);
    for (int j : out_of[static_cast<std::size_t>(link.to_node)])
      if (j != link.twin && j != i) grid.topology.downstream[ui].push_back(j);
    double x0, y0, x1, y1;
    coord(link.from_node, x0, y0);
    coord(link.to_node, x1, y1);
    grid.link_x[ui] = 0.5 * (x0 + x1);
    grid.link_y[ui] = 0.5 * (y0 + y1);
  }
  grid.topology.validate();
  return grid;
}

NetworkTopology generate_topology(const GeneratorConfig& config) {
  return generate_grid(config).topology;
}

Eigen::VectorXd scenario_depth_field(const GridNetwork& grid, ScenarioLabel scenario,
                                     const GeneratorConfig& /*config*/) {
  const auto n = static_cast<std::size_t>(grid.topology.n_links);
  Eigen::VectorXd field(static_cast<std::int64_t>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double x = grid.link_x[i];
    const double y = grid.link_y[i];
    const double d_center = std::max(std::abs(x - 0.5), std::abs(y - 0.5));
    const double center = taper(d_center, 0.20, 0.32);
    const double ring = taper(d_center, 0.40, 0.48) - taper(d_center, 0.14, 0.24);
    const double north = taper(y, 0.22, 0.34);
    double f = 0.0;
    switch (scenario) {
      case ScenarioLabel::ITD:
        // Even congestion around the center, mild inside it.
        f = std::max(std::clamp(ring, 0.0, 1.0), 0.45 * center);
        break;
      case ScenarioLabel::ATD:
        f = std::max(center, north);
        break;
      case ScenarioLabel::ETD:
        f = 0.75 + 0.25 * std::max(center, north);
        break;
    }
    field(static_cast<std::int64_t>(i)) = std::clamp(f, 0.0, 1.0);
  }
  return field;
}

double demand_bump(int t, ScenarioLabel scenario, const GeneratorConfig& config) {
  if (scenario == ScenarioLabel::ETD) {
    // Early ramp to a plateau: congestion holds through the end.
    if (t >= config.etd_ramp_steps) return 1.0;
    const double s = std::sin(0.5 * std::numbers::pi * static_cast<double>(t) /
                              static_cast<double>(config.etd_ramp_steps));
    return s * s;
  }
  // Raised cosine peaking at peak_step, zero at the window edges.
  const double half = static_cast<double>(
      std::max(config.peak_step, config.n_steps - 1 - config.peak_step));
  const double u = (static_cast<double>(t) - config.peak_step) / half;
  if (std::abs(u) >= 1.0) return 0.0;
  const double c = std::cos(0.5 * std::numbers::pi * u);
  return c * c;
}

Eigen::MatrixXd generate_sequence(const GridNetwork& grid, ScenarioLabel scenario,
                                  const GeneratorConfig& config, std::uint64_t seq_seed) {
  config.validate();
  const std::int64_t n = grid.topology.n_links;
  Eigen::MatrixXd seq(n, config.n_steps);
  Rng rng(seq_seed);

  double severity = 1.0;
  if (scenario == ScenarioLabel::ATD)
    severity = rng.uniform(config.atd_severity_min, config.atd_severity_max);

  double depth = config.depth_itd;
  if (scenario == ScenarioLabel::ATD) depth = config.depth_atd;
  if (scenario == ScenarioLabel::ETD) depth = config.depth_etd;

  const Eigen::VectorXd field = scenario_depth_field(grid, scenario, config);
  // Bounded noise (uniform with matching standard deviation) keeps free-flow
  // indexes provably near 1 instead of only probably.
  const double noise_amp = config.noise_std * std::sqrt(3.0);

  for (int t = 0; t < config.n_steps; ++t) {
    const double bump = demand_bump(t, scenario, config);
    for (std::int64_t i = 0; i < n; ++i) {
      const double value =
          1.0 - severity * depth * field(i) * bump + rng.uniform(-noise_amp, noise_amp);
      seq(i, t) = std::clamp(value, 0.0, 1.0);
    }
  }
  return seq;
}

Dataset generate_dataset(const GeneratorConfig& config) {
  config.validate();
  const GridNetwork grid = generate_grid(config);

  struct Plan {
    std::string id;
    ScenarioLabel scenario;
    std::uint64_t seed;
  };
  std::vector<Plan> plans;
  int index = 0;
  auto schedule = [&](ScenarioLabel scenario, int count, const char* prefix) {
    for (int i = 0; i < count; ++i, ++index) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%s_%03d", prefix, i);
      plans.push_back({buf, scenario, derive_seed(config.seed, static_cast<std::uint64_t>(index))});
    }
  };
  schedule(ScenarioLabel::ITD, config.n_itd, "itd");
  schedule(ScenarioLabel::ATD, config.n_atd, "atd");
  schedule(ScenarioLabel::ETD, config.n_etd, "etd");

  Dataset ds;
  ds.topology = grid.topology;
  ds.manifest.step_minutes = config.step_minutes;
  for (const auto& plan : plans)
    ds.manifest.sequences.push_back(
        {plan.id, plan.scenario, config.n_steps, "sequences/" + plan.id + ".csv"});

  const std::int64_t m = static_cast<std::int64_t>(plans.size()) * config.n_steps;
  ds.states.values.resize(grid.topology.n_links, m);
  ds.states.column_index.reserve(static_cast<std::size_t>(m));
  for (const auto& plan : plans)
    for (int t = 0; t < config.n_steps; ++t) ds.states.column_index.push_back({plan.id, t});

  parallel_for(plans.size(), config.threads, [&](std::size_t p) {
    const Eigen::MatrixXd seq =
        generate_sequence(grid, plans[p].scenario, config, plans[p].seed);
    ds.states.values.middleCols(static_cast<std::int64_t>(p) * config.n_steps, config.n_steps) =
        seq;
  });

  ds.states.validate();
  ds.manifest.validate();
  return ds;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  save_dataset(dataset, dir);
  auto out = open_output(dir / "ground_truth.csv");
  out << "sequence_id,scenario\n";
  for (const auto& seq : dataset.manifest.sequences)
    out << seq.id << "," << to_string(seq.scenario) << "\n";
}

}  // namespace netstate
