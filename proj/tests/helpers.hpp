#pragma once

#include <functional>
#include <string>

#include "donutrd/core.hpp"

namespace testing {

// One observation per (age, copy) with every outcome given by functions of
// age. Adherence is stored raw, so callers keep it inside [0, 1].
inline donutrd::Cohort grid_cohort(
    int lo, int hi, int copies, const std::function<double(int)>& oop,
    const std::function<double(int)>& adherence,
    const std::function<bool(int, int)>& treated, int threshold = 65) {
  donutrd::Cohort cohort;
  cohort.threshold = threshold;
  for (int age = lo; age <= hi; ++age)
    for (int k = 0; k < copies; ++k) {
      donutrd::Observation obs;
      obs.id = "g" + std::to_string(age) + "_" + std::to_string(k);
      obs.age = age;
      obs.oop = oop(age);
      obs.adherence = adherence(age);
      obs.treated = treated(age, k);
      cohort.observations.push_back(obs);
    }
  return cohort;
}

inline donutrd::Cohort oop_cohort(int lo, int hi, int copies,
                                  const std::function<double(int)>& oop,
                                  int threshold = 65) {
  return grid_cohort(
      lo, hi, copies, oop, [](int) { return 0.5; },
      [threshold](int age, int) { return age > threshold; }, threshold);
}

}  // namespace testing
