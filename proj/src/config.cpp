#include "edgetimer/config.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace edgetimer {

int ClusterConfig::transmission_slots(int from, int to) const {
  if (from == to) return 0;
  const double km = distance.at(static_cast<std::size_t>(from)).at(static_cast<std::size_t>(to));
  int slots = std::max(1, static_cast<int>(std::ceil(km / link_km_per_slot)));
  if (from == cloud() || to == cloud()) slots += cloud_rtt_slots;
  return slots;
}

ClusterConfig ClusterConfig::layout(int num_edges, int num_services, double region_km, double cloud_km) {
  ClusterConfig cfg;
  cfg.num_edges = num_edges;
  cfg.num_services = num_services;
  cfg.service_mem_footprint.resize(static_cast<std::size_t>(std::max(0, num_services)));
  for (int s = 0; s < num_services; ++s) cfg.service_mem_footprint[static_cast<std::size_t>(s)] = 2.0 + s % 3;

  const int n = std::max(0, num_edges);
  const int side = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n)))));
  const double spacing = side > 1 ? region_km / (side - 1) : 0.0;
  std::vector<std::pair<double, double>> pos;
  for (int i = 0; i < n; ++i) pos.emplace_back((i % side) * spacing, (i / side) * spacing);

  cfg.distance.assign(static_cast<std::size_t>(n + 1), std::vector<double>(static_cast<std::size_t>(n + 1), 0.0));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double dx = pos[i].first - pos[j].first;
      const double dy = pos[i].second - pos[j].second;
      cfg.distance[i][j] = std::sqrt(dx * dx + dy * dy);
    }
    cfg.distance[i][n] = cloud_km;
    cfg.distance[n][i] = cloud_km;
  }
  return cfg;
}

ClusterConfig ClusterConfig::reference() { return layout(12, 12, 5.0, 50.0); }

std::vector<ConfigIssue> validate_config(const ClusterConfig& cfg) {
  std::vector<ConfigIssue> out;
  auto issue = [&](std::string field, std::string msg) { out.push_back({std::move(field), std::move(msg)}); };
  auto positive = [&](const char* name, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) issue(name, std::string(name) + " must be positive");
  };
  auto non_negative = [&](const char* name, double v) {
    if (!(v >= 0.0) || !std::isfinite(v)) issue(name, std::string(name) + " must be non-negative");
  };

  if (cfg.num_edges < 2) issue("num_edges", "num_edges must be at least 2");
  if (cfg.num_services < 1) issue("num_services", "num_services must be at least 1");
  positive("edge_cpu", cfg.edge_cpu);
  positive("edge_mem", cfg.edge_mem);
  positive("cloud_cpu", cfg.cloud_cpu);
  positive("cloud_mem", cfg.cloud_mem);
  positive("slot_length", cfg.slot_length);
  positive("link_km_per_slot", cfg.link_km_per_slot);
  non_negative("unit_price_base", cfg.unit_price_base);
  non_negative("place_cost_per_km", cfg.place_cost_per_km);
  non_negative("offload_cost_per_km", cfg.offload_cost_per_km);
  non_negative("realloc_cost_per_unit", cfg.realloc_cost_per_unit);
  if (cfg.cloud_rtt_slots < 0) issue("cloud_rtt_slots", "cloud_rtt_slots must be non-negative");
  for (auto [name, v] : {std::pair{"tx_budget_fraction", cfg.tx_budget_fraction},
                         std::pair{"compute_budget_fraction", cfg.compute_budget_fraction}}) {
    if (!(v > 0.0 && v <= 1.0)) issue(name, std::string(name) + " must lie in (0, 1]");
  }

  if (cfg.num_services >= 1 &&
      cfg.service_mem_footprint.size() != static_cast<std::size_t>(cfg.num_services)) {
    issue("service_mem_footprint", "service_mem_footprint must have num_services entries");
  } else {
    for (std::size_t s = 0; s < cfg.service_mem_footprint.size(); ++s) {
      if (!(cfg.service_mem_footprint[s] > 0.0)) {
        issue("service_mem_footprint[" + std::to_string(s) + "]", "footprint must be positive");
      }
    }
  }

  if (cfg.num_edges >= 0) {
    const std::size_t n = static_cast<std::size_t>(cfg.num_edges) + 1;
    bool square = cfg.distance.size() == n;
    for (const auto& r : cfg.distance) square = square && r.size() == n;
    if (!square) {
      issue("distance", "distance must be a (num_edges+1) x (num_edges+1) matrix");
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        const std::string here = "distance[" + std::to_string(i) + "][" + std::to_string(i) + "]";
        if (cfg.distance[i][i] != 0.0) issue(here, here + " must be zero");
        for (std::size_t j = 0; j < n; ++j) {
          const double d = cfg.distance[i][j];
          const std::string ij = "distance[" + std::to_string(i) + "][" + std::to_string(j) + "]";
          if (!(d >= 0.0) || !std::isfinite(d)) issue(ij, ij + " must be finite and non-negative");
          if (j > i && d != cfg.distance[j][i]) {
            issue(ij, "distance is not symmetric at (" + std::to_string(i) + "," + std::to_string(j) + ")");
          }
        }
      }
    }
  }
  return out;
}

void require_valid(const ClusterConfig& cfg) {
  const auto issues = validate_config(cfg);
  if (issues.empty()) return;
  std::ostringstream os;
  os << "invalid cluster config:";
  for (const auto& i : issues) os << "\n  " << i.field << ": " << i.message;
  throw std::invalid_argument(os.str());
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace edgetimer
