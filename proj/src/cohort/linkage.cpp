//
// Copyright 2026 The ipsrs Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

#include "ipsrs/cohort.hpp"
#include "ipsrs/error.hpp"

namespace ipsrs::cohort {
namespace {

// Integral of sqrt(r^2 - t^2) from -r to x, x in [-r, r].
double chord_integral(double x, double r) {
  const double t = std::clamp(x, -r, r);
  const double h = std::sqrt(std::max(r * r - t * t, 0.0));
  return 0.5 * (t * h + r * r * std::asin(t / r)) + 0.25 * std::numbers::pi * r * r;
}

double chord_integral(double lo, double hi, double r) {
  return hi > lo ? chord_integral(hi, r) - chord_integral(lo, r) : 0.0;
}

// Area of the disk of radius r at the origin intersected with the quadrant
// {X <= x, Y <= y}.
double quadrant_area(double x, double y, double r) {
  const double xc = std::clamp(x, -r, r);
  const double yc = std::clamp(y, -r, r);
  if (xc <= -r || yc <= -r) return 0.0;
  const double a = std::sqrt(std::max(r * r - yc * yc, 0.0));
  const double sign = yc >= 0.0 ? 1.0 : -1.0;
  // Vertical slice at t spans [-h(t), min(y, h(t))] when that is non-empty.
  double area = chord_integral(-r, xc, r);
  area += sign * chord_integral(-r, std::min(xc, -a), r);
  if (xc > -a) area += yc * (std::min(xc, a) + a);
  if (xc > a) area += sign * chord_integral(a, xc, r);
  return area;
}

bool touches(Point c, double r, const Rect& rect) {
  const double dx = std::max({rect.xmin - c.x, 0.0, c.x - rect.xmax});
  const double dy = std::max({rect.ymin - c.y, 0.0, c.y - rect.ymax});
  return dx * dx + dy * dy < r * r;
}

}  // namespace

double circle_rect_intersection_area(Point center, double radius, const Rect& rect) {
  if (!(radius > 0.0) || !touches(center, radius, rect)) return 0.0;
  const double x1 = rect.xmin - center.x;
  const double x2 = rect.xmax - center.x;
  const double y1 = rect.ymin - center.y;
  const double y2 = rect.ymax - center.y;
  const double area = quadrant_area(x2, y2, radius) - quadrant_area(x1, y2, radius) -
                      quadrant_area(x2, y1, radius) + quadrant_area(x1, y1, radius);
  return std::max(area, 0.0);
}

std::map<std::string, double> link_contextual(const PatientRecord& record,
                                              std::span<const ContextualCell> cells,
                                              double buffer_radius) {
  const std::string who = "patient " + std::to_string(record.patient_id);
  if (record.residence_history.empty()) throw LinkageError(who + ": no residence history");

  std::vector<std::string> measures;
  for (const auto& cell : cells) {
    if (cell.year != record.index_year) continue;
    for (const auto& [name, value] : cell.measures) {
      if (std::find(measures.begin(), measures.end(), name) == measures.end()) {
        measures.push_back(name);
      }
    }
  }
  if (measures.empty()) {
    throw LinkageError(who + ": no contextual cells for year " + std::to_string(record.index_year));
  }
  std::sort(measures.begin(), measures.end());

  std::map<std::string, double> out;
  for (const auto& measure : measures) {
    double time_total = 0.0;
    double time_weighted = 0.0;
    for (const auto& period : record.residence_history) {
      double area_total = 0.0;
      double area_weighted = 0.0;
      for (const auto& cell : cells) {
        if (cell.year != record.index_year) continue;
        const auto it = cell.measures.find(measure);
        if (it == cell.measures.end()) continue;
        const double area = circle_rect_intersection_area(period.point, buffer_radius, cell.bounds);
        if (area <= 0.0) continue;
        area_total += area;
        area_weighted += area * it->second;
      }
      if (!(area_total > 0.0)) {
        throw LinkageError(who + ", measure '" + measure + "': buffer at (" +
                           std::to_string(period.point.x) + ", " + std::to_string(period.point.y) +
                           ") intersects no cell");
      }
      const double duration = period.end_fraction - period.start_fraction;
      time_total += duration;
      time_weighted += duration * (area_weighted / area_total);
    }
    out[measure] = time_weighted / time_total;
  }
  return out;
}

std::vector<std::map<std::string, double>> link_all(std::span<const PatientRecord> records,
                                                    std::span<const ContextualCell> cells,
                                                    double buffer_radius, unsigned workers) {
  // Index cells by year once so each patient only scans its own year.
  std::map<int, std::vector<ContextualCell>> by_year;
  for (const auto& cell : cells) by_year[cell.year].push_back(cell);
  static const std::vector<ContextualCell> kNone;

  std::vector<std::map<std::string, double>> out(records.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto it = by_year.find(records[i].index_year);
      out[i] = link_contextual(records[i], it == by_year.end() ? kNone : it->second, buffer_radius);
    }
  };
  workers = std::max(1U, workers);
  if (workers == 1 || records.size() < 2 * workers) {
    work(0, records.size());
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  const std::size_t chunk = (records.size() + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(records.size(), begin + chunk);
    threads.emplace_back([&, w, begin, end] {
      try {
        work(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace ipsrs::cohort
