// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "xtal/core/errors.hpp"
#include "xtal/core/structure.hpp"

namespace xtal {

struct Evaluation {
    double energy = 0.0;           // eV
    std::vector<Vec3> forces;      // eV/A, -dE/d(cartesian position)
    Mat3 stress = Mat3::Zero();    // eV/A^3, (1/V) dE/d(strain)
};

class EvaluationError : public Error {
public:
    using Error::Error;
};

/// Two atoms closer than the calculator's overlap radius.
class OverlapError : public EvaluationError {
public:
    using EvaluationError::EvaluationError;
};

class Calculator {
public:
    virtual ~Calculator() = default;

    virtual Evaluation evaluate(const CrystalStructure& s) const = 0;
    virtual std::string name() const = 0;

    /// False when concurrent evaluate() calls must be serialized by the caller.
    virtual bool thread_safe() const { return true; }
};

using CalculatorPtr = std::shared_ptr<const Calculator>;

/// Largest per-atom force norm.
double max_force(const std::vector<Vec3>& forces);

} // namespace xtal
