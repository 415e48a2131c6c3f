#include "reference_sim.hpp"

#include <algorithm>
#include <cmath>

namespace reftest {

using edgetimer::Task;

ReferenceSim::ReferenceSim(const edgetimer::ClusterConfig& cfg) : cfg_(cfg) {
  const std::size_t cells = static_cast<std::size_t>(cfg.num_edges * cfg.num_services);
  px_.assign(cells, 0);
  py_.assign(cells, -1);
  pz_.assign(cells, 0.0);
}

int ReferenceSim::hops(int a, int b) const {
  if (a == b) return 0;
  const double km = cfg_.distance[a][b];
  int n = static_cast<int>(std::ceil(km / cfg_.link_km_per_slot));
  if (n < 1) n = 1;
  if (a == cfg_.num_edges || b == cfg_.num_edges) n += cfg_.cloud_rtt_slots;
  return n;
}

std::vector<ReferenceSim::Job*> ReferenceSim::queue_of(Where w, int server) {
  std::vector<Job*> q;
  for (auto& j : jobs_)
    if (j.where == w && (w == AtCloud || w == Moving || j.server == server)) q.push_back(&j);
  std::sort(q.begin(), q.end(), [](const Job* a, const Job* b) { return a->seq < b->seq; });
  return q;
}

double ReferenceSim::in_system() const {
  double w = 0;
  for (const auto& j : jobs_)
    if (j.where != Done) w += j.task.workload;
  return w;
}

RefSlot ReferenceSim::step(const std::vector<int>& x, const std::vector<int>& y, const std::vector<double>& z,
                           const std::vector<std::array<int, 3>>& bits, const std::vector<Task>& arrivals) {
  const int N = cfg_.num_edges, S = cfg_.num_services, C = N;
  auto at = [S](int i, int s) { return static_cast<std::size_t>(i * S + s); };
  RefSlot out;
  out.edges.resize(N);

  for (int i = 0; i < N; ++i) {
    auto& e = out.edges[i];
    for (int s = 0; s < S; ++s) {
      if (x[at(i, s)] && !px_[at(i, s)]) {
        double km = cfg_.distance[i][C];
        for (int j = 0; j < N; ++j)
          if (px_[at(j, s)]) km = std::min(km, cfg_.distance[i][j]);
        e.place_cost += cfg_.place_cost_per_km * km;
      }
      const int k = py_[at(i, s)], m = y[at(i, s)];
      if (k >= 0 && m >= 0 && k != m) e.offload_cost += cfg_.offload_cost_per_km * cfg_.distance[k][m];
      if (z[at(i, s)] > pz_[at(i, s)]) e.alloc_cost += cfg_.realloc_cost_per_unit * (z[at(i, s)] - pz_[at(i, s)]);
    }
  }

  auto enter = [&](Job& j) {
    if (j.entered >= 0) return;
    j.entered = j.age;
    if (j.age <= cfg_.tx_budget_fraction * j.task.delay_budget) out.edges[j.task.origin_edge].offload_in_budget += j.task.workload;
  };

  for (const Task& task : arrivals) {
    Job j;
    j.task = task;
    j.server = task.origin_edge;
    j.left = task.workload;
    j.seq = next_seq_++;
    jobs_.push_back(j);
    out.edges[task.origin_edge].arrived += task.workload;
  }
  for (Job* j : queue_of(Moving, 0)) {
    if (j->land_slot > t_) continue;
    j->dispatched = true;
    enter(*j);
    j->where = j->server == C ? AtCloud : AtEdge;
    j->seq = next_seq_++;
  }

  for (int i = 0; i < N; ++i) {
    for (Job* j : queue_of(AtEdge, i)) {
      const int s = j->task.service;
      bool anywhere = false;
      for (int k = 0; k < N; ++k) anywhere = anywhere || x[at(k, s)];
      (anywhere ? out.edges[i].covered : out.edges[i].unserved) += j->left;
      const bool here = x[at(i, s)] != 0;
      if (j->dispatched && here) continue;
      const int to = y[at(i, s)];
      if (to == i && here) {
        j->dispatched = true;
        enter(*j);
      } else if (to >= 0 && to != i && (to == C || x[at(to, s)])) {
        j->where = Moving;
        j->server = to;
        j->land_slot = t_ + hops(i, to);
        j->seq = next_seq_++;
      } else {
        j->dispatched = false;
        out.edges[i].blocked_tasks++;
      }
    }
  }

  for (int i = 0; i < N; ++i) {
    std::vector<double> budget(S);
    for (int s = 0; s < S; ++s) budget[s] = x[at(i, s)] ? z[at(i, s)] : 0.0;
    for (Job* j : queue_of(AtEdge, i)) {
      if (!j->dispatched) continue;
      const double take = std::min(budget[j->task.service], j->left);
      j->left -= take;
      budget[j->task.service] -= take;
    }
  }
  {
    double budget = cfg_.cloud_cpu;
    for (Job* j : queue_of(AtCloud, 0)) {
      const double take = std::min(budget, j->left);
      j->left -= take;
      budget -= take;
    }
  }

  std::vector<double> mu(static_cast<std::size_t>(N * S), 0.0);
  auto finish = [&](Job& j, int server, int owner) {
    const bool ok = j.age <= j.task.delay_budget;
    auto& e = out.edges[owner];
    if (ok) {
      e.served += j.task.workload;
      mu[at(owner, j.task.service)] += j.task.workload;
      if (j.age - j.entered <= cfg_.compute_budget_fraction * j.task.delay_budget) e.compute_in_budget += j.task.workload;
    } else {
      e.violated += j.task.workload;
      if (server != C) e.late_tasks++;
    }
    out.completions.push_back({j.task.id, j.age, ok, server});
    j.where = Done;
  };
  for (int i = 0; i < N; ++i) {
    for (Job* j : queue_of(AtEdge, i)) {
      j->age++;
      if (j->left <= 0) {
        finish(*j, i, i);
      } else if (j->age > j->task.delay_budget) {
        out.edges[i].late_tasks++;
      }
    }
  }
  for (Job* j : queue_of(AtCloud, 0)) {
    j->age++;
    if (j->left <= 0) finish(*j, C, j->task.origin_edge);
  }
  for (Job* j : queue_of(Moving, 0)) j->age++;

  std::vector<double> q(N, 0.0);
  for (const auto& j : jobs_)
    if (j.where == AtEdge) q[j.server] += j.left;
  double mean = 0;
  for (double w : q) mean += w / N;
  for (int i = 0; i < N; ++i) {
    auto& e = out.edges[i];
    e.queued = q[i];
    for (int s = 0; s < S; ++s) e.revenue += mu[at(i, s)] * cfg_.price(s, t_);
    e.profit = e.revenue - bits[i][0] * e.place_cost - bits[i][1] * e.offload_cost - bits[i][2] * e.alloc_cost;
    out.d += e.covered;
    out.u += e.offload_in_budget;
    out.l += e.compute_in_budget;
    out.v += (q[i] - mean) * (q[i] - mean) / N;
  }

  std::erase_if(jobs_, [](const Job& j) { return j.where == Done; });
  px_ = x;
  py_ = y;
  pz_ = z;
  ++t_;
  return out;
}

}  // namespace reftest
