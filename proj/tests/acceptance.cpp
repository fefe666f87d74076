// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "oracles.hpp"
#include "palmplan/contact_controller.hpp"
#include "palmplan/planner.hpp"
#include "palmplan/pose_estimator.hpp"
#include "palmplan/sim.hpp"

#include <chrono>
#include <cstdio>
#include <random>
#include <sstream>

using namespace palmplan;

namespace {

using Clock = std::chrono::steady_clock;

const ObjectModel kModel;
const Pose3 kPark(Vec3(0.0, 0.6, 0.5), Eigen::Quaterniond::Identity());

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Pose3 from_vector(double x, double y, double z, double qw, double qx, double qy, double qz) {
  return Pose3(Vec3(x, y, z), Eigen::Quaterniond(qw, qx, qy, qz).normalized());
}

double pose_error(const Pose3& a, const Pose3& b) {
  return std::max((a.position() - b.position()).norm(), rotation_angle(a.orientation(), b.orientation()));
}

Pose3 random_pose(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  return Pose3(Vec3(u(rng), u(rng), u(rng)), Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng)).normalized());
}

// Perturbation of at most `pos` metres and `rot` radians.
Pose3 perturb(const Pose3& p, std::mt19937_64& rng, double pos, double rot) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec3 dp(u(rng), u(rng), u(rng)), dr(u(rng), u(rng), u(rng));
  return p.perturbed(dp * pos / std::sqrt(3.0), dr * rot / std::sqrt(3.0));
}

Pose3 resting(const ObjectModel& m, int face, double x, double y, double yaw) {
  return pose_from_placement(m, Placement{face, {x, y, yaw}});
}

// 1 ------------------------------------------------------------------------

Outcome title_sequence() {
  const auto t0 = Clock::now();
  const Pose3 q0 = from_vector(0.3, -0.2, 0.07, 0.38, 0.60, 0.60, 0.38);
  const Pose3 qf = from_vector(0.45, 0.3, 0.045, 0, 0.71, 0, 0.71);
  const auto steps = search_sequence(build_graph(kModel), placement_from_pose(kModel, q0), placement_from_pose(kModel, qf));
  const double dt = seconds_since(t0);
  std::string seq;
  for (const auto& s : steps) seq += std::string(seq.empty() ? "" : " ") + to_string(s.primitive);
  const bool ok = steps.size() == 3 && steps[0].primitive == Primitive::Pull &&
                  steps[1].primitive == Primitive::Pivot && steps[2].primitive == Primitive::Push;
  return {ok && dt < 1.0, "sequence '" + seq + "' in " + std::to_string(dt) + " s"};
}

// 2 ------------------------------------------------------------------------

Outcome equilibrium_exactness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::array<int, 4> per_kind{};
  int feasible = 0, bad = 0, attempts = 0;
  while (feasible < 200 && attempts < 2000) {
    const int kind = attempts++ % 4;
    const ObjectModel m(Vec3(0.06 + 0.1 * u(rng), 0.06 + 0.1 * u(rng), 0.06 + 0.1 * u(rng)), 0.5 + u(rng));
    const int face = static_cast<int>(6 * u(rng)) % 6;
    const Pose3 obj = resting(m, face, u(rng), u(rng), 6 * u(rng));
    ContactFormation f;
    switch (kind) {
      case 0: f = pull_formation(m, face, FormationParams{}, 5.0 * u(rng)); break;
      case 1: f = push_formation(m, face, (face + 2) % 6, FormationParams{}); break;
      case 2: f = grasp_formation(m, face, FormationParams{}); break;
      default: f = pivot_formation(m, m.face_edges(face)[static_cast<int>(4 * u(rng)) % 4], FormationParams{});
    }
    f.disturbance = Wrench(Vec3(0.5 * (u(rng) - 0.5), 0.5 * (u(rng) - 0.5), 0.0), Vec3::Zero());
    const StackedPose q = attach_palms(f, obj, kPark);
    const auto sol = solve_equilibrium(f, q);
    if (!sol.feasible) continue;
    ++feasible;
    ++per_kind[kind];
    bool ok = sol.residual <= 1e-9 * std::max(1.0, f.external_wrench().vector().norm());
    const auto contacts = world_contacts(f, q);
    for (std::size_t i = 0; i < contacts.size(); ++i) ok = ok && cone_contains(contacts[i], sol.wrenches[i]);
    bad += !ok;
  }
  const double dt = seconds_since(t0);
  std::ostringstream os;
  os << feasible << " feasible (pull " << per_kind[0] << ", push " << per_kind[1] << ", grasp " << per_kind[2]
     << ", pivot " << per_kind[3] << "), " << bad << " failing, " << dt << " s";
  const bool all_kinds = *std::min_element(per_kind.begin(), per_kind.end()) > 0;
  return {feasible == 200 && bad == 0 && all_kinds && dt < 30.0, os.str()};
}

// 3 ------------------------------------------------------------------------

struct PivotInstance {
  ContactFormation f;
  StackedPose q;
  std::vector<Wrench> w;
};

PivotInstance pivot_instance(double angle, double yaw, int other_face) {
  PivotInstance s;
  const int edge = kModel.shared_edge(5, other_face);
  s.f = pivot_formation(kModel, edge, FormationParams{});
  s.q = attach_palms(s.f, tip_about_edge(kModel, resting(kModel, 5, 0.4, 0.0, yaw), 5, edge, angle), kPark);
  const auto sol = solve_equilibrium(s.f, s.q);
  if (!sol.feasible) throw std::runtime_error("pivot instance without equilibrium");
  s.w = sol.wrenches;
  return s;
}

// Weighted exact margin over all contacts; -inf if any force leaves its cone.
double weighted_margin(const std::vector<Contact>& contacts, const std::vector<Vec3>& forces,
                       const std::vector<double>& beta, double max_normal) {
  double sum = 0.0;
  for (std::size_t i = 0; i < contacts.size(); ++i) {
    const Vec3& f = forces[i];
    if (f.x() < 0.0 || f.x() > max_normal) return -std::numeric_limits<double>::infinity();
    const double phi = signed_margin(contacts[i], Wrench(f, Vec3::Zero()));
    if (phi < 0.0) return -std::numeric_limits<double>::infinity();
    sum += beta[i] * phi;
  }
  return sum;
}

bool tilt_keeps_palms_outside(const PivotInstance& s, const StackedPose& q) {
  for (int palm = 0; palm < 2; ++palm) {
    const Pose3& p = palm == 0 ? q.left : q.right;
    const Vec3 n = p.rotate(Vec3::UnitZ());
    for (const auto& c : kModel.corners())
      if ((s.q.object.transform_point(c) - p.position()).dot(n) < -1e-12) return false;
  }
  return true;
}

// Brute force over palm tilts and contact forces with the object held fixed.
// Tilts are gridded directly; three force components are gridded and the
// remaining six follow from exact balance at the tilted configuration.
double grid_optimum(const PivotInstance& s, const std::vector<double>& beta, const ControllerSettings& cfg,
                    double tilt_step, double force_step) {
  const int nc = static_cast<int>(s.f.contacts.size());
  const int nf = 3 * nc;
  const double max_normal = s.f.max_normal_force;
  Eigen::VectorXd w0(nf);
  for (int i = 0; i < nc; ++i) w0.segment<3>(3 * i) = s.w[i].force();

  auto grasp_map = [&](const StackedPose& q) {
    Eigen::MatrixXd g(6, nf);
    for (int k = 0; k < nf; ++k) {
      std::vector<Wrench> unit(nc, Wrench());
      Vec3 e = Vec3::Zero();
      e(k % 3) = 1.0;
      unit[k / 3] = Wrench(e, Vec3::Zero());
      g.col(k) = net_contact_wrench(s.f, q, unit);
    }
    return g;
  };

  // Free components: the ones left over by a pivoted QR of the nominal map.
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(grasp_map(s.q));
  std::vector<int> dep, fre;
  for (int k = 0; k < nf; ++k) (k < 6 ? dep : fre).push_back(qr.colsPermutation().indices()(k));

  const int nt = static_cast<int>(std::lround(cfg.rot_bound / tilt_step));
  const int nw = static_cast<int>(std::lround(cfg.force_bound / force_step));
  const Vec6 wext = s.f.external_wrench().vector();
  double best = -std::numeric_limits<double>::infinity();
  std::vector<Vec3> forces(nc);
  Eigen::VectorXd w(nf);
  for (int a = -nt; a <= nt; ++a)
    for (int b = -nt; b <= nt; ++b)
      for (int c = -nt; c <= nt; ++c)
        for (int d = -nt; d <= nt; ++d) {
          Eigen::Matrix<double, kPalmDofs, 1> dq = Eigen::Matrix<double, kPalmDofs, 1>::Zero();
          const Mat3 rl = s.q.left.rotation(), rr = s.q.right.rotation();
          dq.segment<3>(3) = tilt_step * (a * rl.col(0) + b * rl.col(1));
          dq.segment<3>(9) = tilt_step * (c * rr.col(0) + d * rr.col(1));
          const StackedPose q = apply_palm_delta(s.q, dq);
          if (!tilt_keeps_palms_outside(s, q)) continue;
          const Eigen::MatrixXd g = grasp_map(q);
          Eigen::MatrixXd gd(6, 6), gf(6, 3);
          for (int k = 0; k < 6; ++k) gd.col(k) = g.col(dep[k]);
          for (int k = 0; k < 3; ++k) gf.col(k) = g.col(fre[k]);
          const Eigen::PartialPivLU<Eigen::MatrixXd> lu(gd);
          const Vec6 base = lu.solve(-wext);
          const Eigen::Matrix<double, 6, 3> m = lu.solve(gf);
          std::vector<Contact> contacts;
          for (const auto& fc : s.f.contacts) contacts.push_back(world_contact(s.f, fc, q));
          for (int i = -nw; i <= nw; ++i)
            for (int j = -nw; j <= nw; ++j)
              for (int k = -nw; k <= nw; ++k) {
                const Vec3 z(w0(fre[0]) + i * force_step, w0(fre[1]) + j * force_step, w0(fre[2]) + k * force_step);
                const Vec6 wd = base - m * z;
                bool inside = true;
                for (int r = 0; r < 6 && inside; ++r) inside = std::abs(wd(r) - w0(dep[r])) <= cfg.force_bound + 1e-12;
                if (!inside) continue;
                for (int r = 0; r < 6; ++r) w(dep[r]) = wd(r);
                for (int r = 0; r < 3; ++r) w(fre[r]) = z(r);
                for (int ci = 0; ci < nc; ++ci) forces[ci] = w.segment<3>(3 * ci);
                const double v = weighted_margin(contacts, forces, beta, max_normal);
                best = std::max(best, v);
              }
        }
  return best;
}

Outcome controller_vs_oracle() {
  const auto t0 = Clock::now();
  const ControllerSettings cfg;
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> angle(0.15, 1.3), yaw(-kPi, kPi);
  int instances = 0, within = 0, monotone = 0;
  double worst_gap = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const PivotInstance s = pivot_instance(angle(rng), yaw(rng), trial % 2 ? 2 : 1);
    const int slipping = trial % 2;
    SlipSignal sig;
    sig.bits.assign(s.f.contacts.size(), 0);
    sig.bits[slipping] = 1;
    const auto beta = slip_weights(sig, cfg);

    const auto adj = control_step(s.f, s.q, s.w, sig, cfg);
    if (!adj.applied) continue;
    ++instances;
    const StackedPose q_next = apply_palm_delta(s.q, adj.palm_delta());
    std::vector<Contact> after, before;
    std::vector<Vec3> f_after, f_before;
    for (std::size_t i = 0; i < s.f.contacts.size(); ++i) {
      after.push_back(world_contact(s.f, s.f.contacts[i], q_next));
      before.push_back(world_contact(s.f, s.f.contacts[i], s.q));
      f_after.push_back(adj.wrenches[i].force());
      f_before.push_back(s.w[i].force());
    }
    const double achieved = weighted_margin(after, f_after, beta, s.f.max_normal_force);
    const double opt = grid_optimum(s, beta, cfg, 0.005, 0.1);
    const double gap = std::abs(achieved - opt) / std::abs(opt);
    worst_gap = std::max(worst_gap, gap);
    within += gap <= 0.1;
    const double phi_before = signed_margin(before[slipping], s.w[slipping]);
    const double phi_after = signed_margin(after[slipping], adj.wrenches[slipping]);
    monotone += phi_after >= phi_before - 1e-12;
  }
  const double dt = seconds_since(t0);
  std::ostringstream os;
  os << instances << " instances, " << within << " within 10% (worst " << 100 * worst_gap << "%), " << monotone
     << " with non-decreasing slip margin, " << dt << " s";
  return {instances >= 20 && within == instances && monotone == instances && dt < 300.0, os.str()};
}

// 4 ------------------------------------------------------------------------

Outcome jacobian_fidelity() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double h = 1e-6;
  int bad = 0, checked = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    PivotInstance s;
    if (trial % 4 == 0) {
      s = pivot_instance(0.1 + 1.3 * u(rng), 6.0 * u(rng), trial % 8 ? 2 : 1);
    } else {
      const int face = static_cast<int>(6 * u(rng)) % 6;
      switch (trial % 4) {
        case 1: s.f = pull_formation(kModel, face, FormationParams{}, 1.0 + 4.0 * u(rng)); break;
        case 2: s.f = grasp_formation(kModel, face, FormationParams{}); break;
        default: s.f = push_formation(kModel, face, (face + 2) % 6, FormationParams{});
      }
      s.q = attach_palms(s.f, resting(kModel, face, u(rng), u(rng), 6.0 * u(rng)), kPark);
      const auto sol = solve_equilibrium(s.f, s.q);
      if (!sol.feasible) continue;
      s.w = sol.wrenches;
    }
    ++checked;
    const auto lin = linearize_equilibrium(s.f, s.q, s.w);
    Eigen::Matrix<double, 6, kPalmDofs> fd;
    for (int k = 0; k < kPalmDofs; ++k) {
      Eigen::Matrix<double, kPalmDofs, 1> d = Eigen::Matrix<double, kPalmDofs, 1>::Zero();
      d(k) = h;
      fd.col(k) = (net_contact_wrench(s.f, apply_palm_delta(s.q, d), s.w) -
                   net_contact_wrench(s.f, apply_palm_delta(s.q, -d), s.w)) / (2.0 * h);
    }
    double rel = (lin.d_palm - fd).norm() / std::max(1.0, fd.norm());
    for (std::size_t i = 0; i < s.w.size(); ++i) {
      Mat6 fdw;
      for (int k = 0; k < 6; ++k) {
        auto plus = s.w, minus = s.w;
        Vec6 e = Vec6::Zero();
        e(k) = h;
        plus[i] = Wrench(s.w[i].vector() + e);
        minus[i] = Wrench(s.w[i].vector() - e);
        fdw.col(k) = (net_contact_wrench(s.f, s.q, plus) - net_contact_wrench(s.f, s.q, minus)) / (2.0 * h);
      }
      rel = std::max(rel, (lin.d_wrench[i] - fdw).norm() / std::max(1.0, fdw.norm()));
    }
    worst = std::max(worst, rel);
    bad += rel > 1e-5;
  }
  const double dt = seconds_since(t0);
  std::ostringstream os;
  os << checked << " configurations, worst relative error " << worst << ", " << dt << " s";
  return {checked == 100 && bad == 0 && dt < 10.0, os.str()};
}

// 5 ------------------------------------------------------------------------

Outcome estimator_round_trip() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int trials = 500;

  // Exact features: three grasp corners, or a pivot edge with both palm corners.
  int exact_ok = 0;
  double worst = 0.0;
  const int pivot_edge = kModel.shared_edge(5, 0);
  const Pose3 pivot_start = resting(kModel, 5, 0.4, 0.0, 0.2);
  for (int trial = 0; trial < trials; ++trial) {
    Pose3 truth, prior;
    PoseEstimate est;
    if (trial % 2 == 0) {
      truth = random_pose(rng);
      prior = perturb(truth, rng, 0.02, 0.2);
      const Pose3 l = truth * Pose3(Vec3(-0.045, 0, 0), Eigen::Quaterniond(Eigen::AngleAxisd(kPi / 2, Vec3::UnitY())));
      const Pose3 r = truth * Pose3(Vec3(0.045, 0, 0), Eigen::Quaterniond(Eigen::AngleAxisd(-kPi / 2, Vec3::UnitY())));
      const std::vector<TactileFeature> fs = {corner_feature(kModel, truth, l, PalmSide::Left, 0),
                                              corner_feature(kModel, truth, l, PalmSide::Left, 2),
                                              corner_feature(kModel, truth, r, PalmSide::Right, 5)};
      est = estimate(prior, fs, {l, r}, kModel, Primitive::Grasp);
    } else {
      truth = tip_about_edge(kModel, pivot_start, 5, pivot_edge, 0.05 + 1.45 * u(rng));
      prior = perturb(truth, rng, 0.02, 0.2);
      const auto f = pivot_formation(kModel, pivot_edge, FormationParams{});
      const StackedPose q = attach_palms(f, truth, kPark);
      const std::vector<TactileFeature> fs = {
          corner_feature(kModel, truth, q.left, PalmSide::Left, f.contacts[0].corner),
          corner_feature(kModel, truth, q.right, PalmSide::Right, f.contacts[1].corner)};
      // The table line the edge rolls on is known from the plan.
      const Edge& e = kModel.edges()[pivot_edge];
      PivotLine line{pivot_edge, truth.transform_point(e.point), truth.rotate(e.direction)};
      line.point.z() = 0.0;
      est = PoseEstimator(kModel).estimate(prior, fs, {q.left, q.right}, Primitive::Pivot, line);
    }
    const double e = pose_error(est.pose, truth);
    worst = std::max(worst, e);
    exact_ok += e <= 1e-6;
  }

  // Noisy top-edge features under a pulling palm.
  const double sigma = 3e-4;
  std::normal_distribution<double> noise(0.0, sigma);
  EstimatorSettings cfg;
  cfg.infeasible_tol = 1e-2;
  int within = 0;
  for (int trial = 0; trial < trials; ++trial) {
    const Pose3 truth = resting(kModel, 5, 0.2 + 0.4 * u(rng), 0.4 * u(rng) - 0.2, 6.0 * u(rng));
    const Pose3 prior = perturb(truth, rng, 0.02, 0.2);
    const Pose3 palm = truth * Pose3(Vec3(0, 0, 0.05), Eigen::Quaterniond(Eigen::AngleAxisd(kPi, Vec3::UnitX())));
    std::vector<TactileFeature> fs;
    for (int e : kModel.face_edges(ObjectModel::opposite_face(5))) {
      auto f = edge_feature(kModel, truth, palm, PalmSide::Left, e);
      f.point += Vec3(noise(rng), noise(rng), noise(rng));
      fs.push_back(f);
    }
    const auto est = estimate(prior, fs, {palm, palm}, kModel, Primitive::Pull, cfg);
    within += (est.pose.position() - truth.position()).norm() <= 3.0 * sigma;
  }
  const double dt = seconds_since(t0);
  std::ostringstream os;
  os << exact_ok << "/" << trials << " exact (worst " << worst << "), " << within << "/" << trials
     << " noisy within 3 sigma, " << dt << " s";
  return {exact_ok == trials && within >= 0.99 * trials && dt < 60.0, os.str()};
}

// 6 ------------------------------------------------------------------------

Outcome dubins_optimality() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(66);
  std::uniform_real_distribution<double> u(-0.4, 0.4), yaw(-kPi, kPi), radius(0.02, 0.2);
  int bad = 0;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const PlanarPose a{u(rng), u(rng), yaw(rng)}, b{u(rng), u(rng), yaw(rng)};
    const double r = radius(rng);
    const double gap = std::abs(shortest_dubins(a, b, r).length() - oracle::oracle_length(a, b, r));
    worst = std::max(worst, gap);
    bad += gap > 1e-6;
  }
  const double dt = seconds_since(t0);
  std::ostringstream os;
  os << 100 - bad << "/100 pairs, worst gap " << worst << " m, " << dt << " s";
  return {bad == 0 && dt < 30.0, os.str()};
}

// 7 ------------------------------------------------------------------------

Outcome dijkstra_optimality() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> cost(0.1, 5.0), u(0.0, 1.0);
  int bad = 0, connected = 0;
  for (int g = 0; g < 50; ++g) {
    const int n = 3 + g % 10;
    std::vector<WeightedEdge> e;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j && u(rng) < 0.35) e.push_back({i, j, cost(rng)});
    const double best = oracle::exhaustive_shortest(n, e);
    const auto p = dijkstra(n, e, 0, n - 1);
    connected += p.found;
    bool ok = p.found == std::isfinite(best);
    if (ok && p.found) {
      double sum = 0.0;
      for (int ei : p.edges) sum += e[ei].cost;
      ok = std::abs(p.cost - best) <= 1e-12 && std::abs(sum - best) <= 1e-12;
    }
    bad += !ok;
  }
  const double dt = seconds_since(t0);
  std::ostringstream os;
  os << 50 - bad << "/50 graphs (" << connected << " with a path), " << dt << " s";
  return {bad == 0 && dt < 5.0, os.str()};
}

// 8 and 9 -----------------------------------------------------------------

const TickRecord* tick_at(const RunResult& r, double t) {
  for (const auto& k : r.ticks)
    if (std::abs(k.time - t) < 1e-9) return &k;
  return nullptr;
}

std::string csv_of(const RunResult& r) {
  std::ostringstream os;
  write_csv(os, r.ticks);
  return os.str();
}

// Regulation scene with two impulses of randomized size, direction and timing.
std::string regulation_scene(bool pull, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto tick = [](double t) { return std::round(t * 100.0) / 100.0; };
  const double dir = 2.0 * kPi * u(rng);
  std::ostringstream os;
  os << "[task]\nmode = " << (pull ? "pull\nstart = 0.4 0 0.05 1 0 0 0" : "grasp\nstart = 0.4 0 0.1 1 0 0 0")
     << "\nduration = 9\n";
  os << "[sim]\nseed = " << static_cast<int>(1000 * u(rng)) << "\n";
  const double f1 = pull ? 15.0 + 10.0 * u(rng) : 10.0 + 10.0 * u(rng);
  os << "[perturbation]\nstart = " << tick(1.5 + u(rng)) << "\nduration = 0.05\nforce = " << f1 * std::cos(dir) << " "
     << f1 * std::sin(dir) << " 0\n";
  const double t2 = tick(4.5 + u(rng)), torque = 0.6 * u(rng) - 0.3;
  if (pull) {
    const double f2 = 10.0 + 10.0 * u(rng), dir2 = 2.0 * kPi * u(rng);
    os << "[perturbation]\nstart = " << t2 << "\nduration = 0.05\nforce = " << f2 * std::cos(dir2) << " "
       << f2 * std::sin(dir2) << " 0\ntorque = 0 0 " << torque << "\n";
  } else {
    os << "[perturbation]\nstart = " << t2 << "\nduration = 0.05\nforce = 0 0 " << -(5.0 + 10.0 * u(rng))
       << "\ntorque = " << torque << " 0 0\n";
  }
  return os.str();
}

std::string first_scene_csv;
SceneConfig first_scene;

Outcome closed_loop_regulation() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(88);
  int recovered = 0, beats = 0;
  std::ostringstream misses;
  for (int i = 0; i < 10; ++i) {
    const SceneConfig sc = parse_scene(regulation_scene(i % 2 == 0, rng));
    const RunResult closed = run_closed_loop(sc);
    const RunResult open = run_closed_loop(sc, true);
    if (i == 0) {
      first_scene = sc;
      first_scene_csv = csv_of(closed);
    }
    bool ok = true;
    for (const auto& p : sc.perturbations) {
      const TickRecord* k = tick_at(closed, p.start + p.duration + 3.0);
      ok = ok && k && k->err_pos <= 2e-3 && k->err_ang <= 0.02;
    }
    recovered += ok;
    if (!ok) misses << " scene " << i;
    const auto final_err = [](const RunResult& r) { return r.ticks.back().err_pos + r.ticks.back().err_ang; };
    beats += final_err(closed) < final_err(open);
  }
  const double dt = seconds_since(t0);
  std::ostringstream os;
  os << recovered << "/10 recovered within 3 s" << misses.str() << ", closed loop beats open loop in " << beats
     << "/10, " << dt << " s";
  return {recovered == 10 && beats >= 9 && dt < 120.0, os.str()};
}

Outcome determinism() {
  if (first_scene_csv.empty()) return {false, "regulation run missing"};
  const std::string again = csv_of(run_closed_loop(first_scene));
  return {again == first_scene_csv,
          "seed " + std::to_string(first_scene.seed) + ", " + std::to_string(again.size()) + " bytes, " +
              (again == first_scene_csv ? "identical" : "different")};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {"1 title sequence", title_sequence},
      {"2 equilibrium exactness", equilibrium_exactness},
      {"3 controller vs grid oracle", controller_vs_oracle},
      {"4 linearization fidelity", jacobian_fidelity},
      {"5 estimator round trip", estimator_round_trip},
      {"6 dubins optimality", dubins_optimality},
      {"7 dijkstra optimality", dijkstra_optimality},
      {"8 closed-loop regulation", closed_loop_regulation},
      {"9 determinism", determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s criterion %s: %s\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
