#include "bess/reports.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

#include "bess/format.hpp"
#include "bess/load_profile.hpp"

namespace bess {

namespace {

std::string timestamp_at(const std::string& start_time, double dt_s, std::size_t i) {
  const auto start = parse_iso8601(start_time);
  if (!start) return {};
  return format_iso8601(*start + static_cast<std::int64_t>(std::llround(dt_s * static_cast<double>(i))));
}

std::string date_of(const std::string& start_time, std::size_t day) {
  return timestamp_at(start_time, 86400.0, day).substr(0, 10);
}

void metrics_row(std::ostringstream& o, const ShavingMetrics& m) {
  o << format_double(m.e_chr_wh) << ',' << format_double(m.e_dis_wh) << ','
    << format_double(m.e_val_wh) << ',' << format_double(m.e_pek_wh) << ',' << format_optional(m.cr)
    << ',' << format_optional(m.rr) << ',' << format_double(m.cur) << ','
    << format_optional(m.power_utilization) << ',' << format_double(m.equivalent_cycles);
}

} // namespace

std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp-" + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    f.flush();
    if (!f) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw std::runtime_error("write to '" + tmp.string() + "' failed");
    }
  }
  std::filesystem::rename(tmp, path);
}

void OutputSet::add(std::string name, std::string content) {
  files_.emplace_back(std::move(name), std::move(content));
}

void OutputSet::commit(nlohmann::json manifest) const {
  auto listed = nlohmann::json::array();
  for (const auto& [name, content] : files_) {
    atomic_write(dir_ / name, content);
    listed.push_back({{"name", name}, {"bytes", content.size()}, {"fnv1a", hex64(fnv1a(content))}});
  }
  const auto now = std::chrono::system_clock::now();
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
  manifest["tool"] = "bess";
  manifest["version"] = BESS_VERSION;
  manifest["created_utc"] = format_iso8601(secs);
  manifest["files"] = listed;
  atomic_write(dir_ / "manifest.json", manifest.dump(2) + "\n");
}

std::string metrics_csv(const std::vector<NamedRun>& runs, const std::string& start_time) {
  std::ostringstream o;
  o << "method,day,date,e_chr_wh,e_dis_wh,e_val_wh,e_pek_wh,cr,rr,cur,power_utilization,"
       "equivalent_cycles,feasible_cycles,total_cycles,truncated_steps\n";
  for (const auto& r : runs) {
    for (const auto& d : r.sim->days) {
      std::size_t feasible = 0;
      for (const auto& c : d.plan.cycles) feasible += c.feasible ? 1 : 0;
      o << r.name << ',' << d.day << ',' << date_of(start_time, d.day) << ',';
      metrics_row(o, d.metrics);
      o << ',' << feasible << ',' << d.plan.cycles.size() << ',' << d.truncated_steps << '\n';
    }
  }
  for (const auto& r : runs) {
    std::size_t feasible = 0, cycles = 0, truncated = 0;
    for (const auto& d : r.sim->days) {
      for (const auto& c : d.plan.cycles) feasible += c.feasible ? 1 : 0;
      cycles += d.plan.cycles.size();
      truncated += d.truncated_steps;
    }
    o << r.name << ",summary,,";
    metrics_row(o, summarize_metrics(*r.sim));
    o << ',' << feasible << ',' << cycles << ',' << truncated << '\n';
  }
  return o.str();
}

nlohmann::json metrics_json(const std::vector<NamedRun>& runs, const std::string& start_time) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& r : runs) {
    auto days = nlohmann::json::array();
    for (const auto& d : r.sim->days) {
      nlohmann::json m = d.metrics;
      m["day"] = d.day;
      m["date"] = date_of(start_time, d.day);
      m["truncated_steps"] = d.truncated_steps;
      days.push_back(m);
    }
    out[r.name] = {{"days", days}, {"summary", summarize_metrics(*r.sim)}, {"ledger", r.sim->total}};
  }
  return out;
}

std::string ledger_csv(const LedgerReport& report) {
  std::ostringstream o;
  o << "component,loss_wh,share,throughput_wh,efficiency,delta_loss_wh,delta_efficiency\n";
  for (const auto& r : report.rows)
    o << r.component << ',' << format_double(r.loss_wh) << ',' << format_double(r.share) << ','
      << format_double(r.throughput_wh) << ',' << format_double(r.efficiency) << ','
      << format_optional(r.delta_loss_wh) << ',' << format_optional(r.delta_efficiency) << '\n';
  return o.str();
}

std::string sweep_csv(const std::vector<DepthSweepReport>& reports) {
  std::ostringstream o;
  o << "depth_w,cluster_count,operating_samples";
  for (const char* s : {"p_clu_w", "dp_dt_w_per_s", "p_loss_w", "p_ss_w", "p_ts_w"})
    for (const char* q : {"min", "q1", "median", "q3", "max"}) o << ',' << s << '_' << q;
  o << ",e_ss_wh,e_ts_wh,e_loss_wh,ts_reduction_fraction";
  for (const char* c : kComponentNames) o << ",share_" << c;
  o << '\n';
  for (const auto& r : reports) {
    o << format_double(r.depth_w) << ',' << r.cluster_count << ',' << r.operating_samples;
    for (const BoxStats* b : {&r.p_clu_stats, &r.dp_dt_stats, &r.p_loss_stats, &r.p_ss_stats,
                              &r.p_ts_stats})
      o << ',' << format_double(b->min) << ',' << format_double(b->q1) << ','
        << format_double(b->median) << ',' << format_double(b->q3) << ',' << format_double(b->max);
    o << ',' << format_double(r.e_ss_wh) << ',' << format_double(r.e_ts_wh) << ','
      << format_double(r.e_loss_wh) << ',' << format_double(r.ts_reduction_fraction);
    for (double s : r.component_shares) o << ',' << format_double(s);
    o << '\n';
  }
  return o.str();
}

std::string scatter_csv(const std::array<EfficiencyScatter, 2>& scatter) {
  std::ostringstream o;
  o << "direction,power_w,efficiency\n";
  for (const auto& s : scatter) {
    const char* dir = s.direction == FlowDirection::charge ? "charge" : "discharge";
    for (const auto& p : s.points)
      o << dir << ',' << format_double(p.power_w) << ',' << format_double(p.efficiency) << '\n';
  }
  return o.str();
}

std::string median_csv(const std::array<EfficiencyScatter, 2>& scatter) {
  std::ostringstream o;
  o << "direction,bin_lo_w,bin_hi_w,count,median_efficiency\n";
  for (const auto& s : scatter) {
    const char* dir = s.direction == FlowDirection::charge ? "charge" : "discharge";
    for (const auto& b : s.median_curve)
      o << dir << ',' << format_double(b.lo_w) << ',' << format_double(b.hi_w) << ',' << b.count
        << ',' << format_double(b.median) << '\n';
  }
  return o.str();
}

std::string steps_csv(const SimulationResult& sim, const std::string& start_time) {
  std::ostringstream o;
  o << "step,timestamp,load_w,demand_w,actual_w,grid_wh,stored_wh,loss_wh\n";
  for (std::size_t i = 0; i < sim.steps.size(); ++i) {
    const auto& s = sim.steps[i];
    o << i << ',' << timestamp_at(start_time, sim.dt_s, i) << ',' << format_double(s.load_w) << ','
      << format_double(s.demand_w) << ',' << format_double(s.actual_w) << ','
      << format_double(s.grid_wh) << ',' << format_double(s.stored_wh) << ','
      << format_double(s.loss_wh) << '\n';
  }
  return o.str();
}

std::string allocation_csv(const SimulationResult& sim, const std::string& start_time) {
  std::ostringstream o;
  const std::size_t m = sim.allocation.empty() ? 0 : sim.allocation.front().size();
  o << "step,timestamp,p_sys_w";
  for (std::size_t j = 0; j < m; ++j) o << ",k_" << j;
  o << '\n';
  for (std::size_t i = 0; i < sim.allocation.size(); ++i) {
    const double p = i < sim.steps.size() ? sim.steps[i].actual_w : 0.0;
    o << i << ',' << timestamp_at(start_time, sim.dt_s, i) << ',' << format_double(p);
    for (double k : sim.allocation[i]) o << ',' << format_double(p == 0.0 ? 0.0 : k);
    o << '\n';
  }
  return o.str();
}

std::string pso_trace_csv(const SimulationResult& sim) {
  std::ostringstream o;
  const std::size_t m =
      sim.pso_log.empty() || sim.pso_log.front().best_k.empty() ? 0 : sim.pso_log.front().best_k.front().size();
  o << "run,step,p_sys_w,iteration,best_fitness_wh,balanced_fitness_wh";
  for (std::size_t j = 0; j < m; ++j) o << ",k_" << j;
  o << '\n';
  for (std::size_t r = 0; r < sim.pso_log.size(); ++r) {
    const auto& rec = sim.pso_log[r];
    for (std::size_t it = 0; it < rec.best_fitness.size(); ++it) {
      o << r << ',' << rec.step << ',' << format_double(rec.p_sys_w) << ',' << it << ','
        << format_double(rec.best_fitness[it]) << ',' << format_double(rec.balanced_fitness);
      for (double k : rec.best_k[it]) o << ',' << format_double(k);
      o << '\n';
    }
  }
  return o.str();
}

std::string plans_csv(const std::vector<NamedRun>& runs, const std::string& start_time) {
  std::ostringstream o;
  o << "method,day,date,interval,kind,begin_step,end_step,ref_w,initial_chr_ref_w,initial_dis_ref_w\n";
  for (const auto& r : runs)
    for (const auto& d : r.sim->days)
      for (std::size_t i = 0; i < d.plan.intervals.size(); ++i) {
        const auto& iv = d.plan.intervals[i];
        o << r.name << ',' << d.day << ',' << date_of(start_time, d.day) << ',' << i << ','
          << (iv.kind == IntervalKind::charge ? "charge" : "discharge") << ',' << iv.range.begin
          << ',' << iv.range.end << ',' << format_double(iv.ref_w) << ','
          << format_double(d.plan.initial_chr_ref_w) << ','
          << format_double(d.plan.initial_dis_ref_w) << '\n';
      }
  return o.str();
}

} // namespace bess
