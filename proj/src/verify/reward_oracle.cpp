#include "flicker/verify/reward_oracle.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace flicker {

namespace {

double gap(const Bodies& a, std::size_t i, const Bodies& b, std::size_t j) {
  double dx = a.x[i] - b.x[j];
  double dy = a.y[i] - b.y[j];
  return std::sqrt(dx * dx + dy * dy) - a.r[i] - b.r[j];
}

double edge_penalty(double x, double y, double bound, double offset) {
  if (!(std::fabs(x) > bound) && !(std::fabs(y) > bound)) return 0.0;
  double px = -std::pow(5.0, std::fabs(x) - offset);
  double py = -std::pow(5.0, std::fabs(y) - offset);
  double worst = px < py ? px : py;
  return worst < -25.0 ? -25.0 : worst;
}

// min over i in `from` of gap(from_i, to_j)
double nearest(const Bodies& from, const Bodies& to, std::size_t j) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < from.size(); ++i) {
    double d = gap(from, i, to, j);
    if (d < best) best = d;
  }
  return best;
}

}  // namespace

double oracle_reward(EnvId env, const Bodies& ag, const Bodies& adv, const Bodies& tar, double bound,
                     double offset) {
  if (ag.size() == 0) throw std::invalid_argument("oracle: no agents");
  double total = 0.0;
  if (env == EnvId::Tag) {
    for (std::size_t a = 0; a < ag.size(); ++a) {
      double hits = 0.0;
      for (std::size_t k = 0; k < adv.size(); ++k) {
        if (gap(ag, a, adv, k) < 0.0) hits += 1.0;
      }
      total += edge_penalty(ag.x[a], ag.y[a], bound, offset) - 2.0 * hits;
    }
    return total;
  }
  if (env == EnvId::Spread) {
    for (std::size_t t = 0; t < tar.size(); ++t) total += nearest(ag, tar, t);
    return -total;
  }
  if (env == EnvId::Guard) {
    if (tar.size() == 0) throw std::invalid_argument("oracle: no targets");
    std::size_t i = ag.size() / tar.size() + (ag.size() % tar.size() != 0 ? 1 : 0);
    for (std::size_t t = 0; t < tar.size(); ++t) {
      std::vector<bool> taken(ag.size(), false);
      double closest = 0.0;
      for (std::size_t k = 0; k < i; ++k) {
        std::size_t pick = ag.size();
        for (std::size_t a = 0; a < ag.size(); ++a) {
          if (taken[a]) continue;
          if (pick == ag.size() || gap(ag, a, tar, t) < gap(ag, pick, tar, t)) pick = a;
        }
        taken[pick] = true;
        closest += gap(ag, pick, tar, t);
      }
      double hits = 0.0;
      for (std::size_t a = 0; a < ag.size(); ++a) {
        if (gap(ag, a, tar, t) < 0.0) hits += 1.0;
      }
      total += closest + 5.0 * hits;
    }
    return -total;
  }
  if (adv.size() == 0) throw std::invalid_argument("oracle: no adversaries");
  if (env == EnvId::Repel) {
    double edges = 0.0;
    for (std::size_t a = 0; a < ag.size(); ++a) edges += edge_penalty(ag.x[a], ag.y[a], bound, offset);
    double spread = 0.0;
    for (std::size_t k = 0; k < adv.size(); ++k) spread += nearest(ag, adv, k);
    return edges + spread;
  }
  if (env == EnvId::Adversary) {
    double ours = 0.0;
    double theirs = 0.0;
    for (std::size_t t = 0; t < tar.size(); ++t) ours += nearest(ag, tar, t);
    for (std::size_t t = 0; t < tar.size(); ++t) theirs += nearest(adv, tar, t);
    return -ours + theirs;
  }
  // Hunt
  double chase = 0.0;
  for (std::size_t k = 0; k < adv.size(); ++k) chase += nearest(ag, adv, k);
  double cover = 0.0;
  for (std::size_t a = 0; a < ag.size(); ++a) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < adv.size(); ++k) {
      double d = gap(ag, a, adv, k);
      if (d < best) best = d;
    }
    cover += best;
  }
  return -(chase / static_cast<double>(adv.size()) + cover / static_cast<double>(ag.size()));
}

double oracle_reward(const Scenario& sc, std::span<const Entity> entities) {
  Bodies ag, adv, tar;
  const int agent = sc.type_index("agent");
  const int adversary = sc.type_index("adversary");
  const int target = sc.type_index("target");
  for (const auto& e : entities) {
    if (!e.active) continue;
    Bodies* into = e.kind == agent ? &ag : e.kind == adversary ? &adv : e.kind == target ? &tar : nullptr;
    if (!into) continue;
    into->x.push_back(e.pos.x);
    into->y.push_back(e.pos.y);
    into->r.push_back(e.radius);
  }
  return oracle_reward(sc.env, ag, adv, tar, sc.bound, sc.penalty_offset());
}

}  // namespace flicker
