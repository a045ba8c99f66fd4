// SPDX-License-Identifier: Apache-2.0
#include "xtal/energy/relax.hpp"

#include <cmath>

#include <Eigen/Dense>

namespace xtal {

namespace {

using Vec = Eigen::VectorXd;

// Degrees of freedom: reference positions u_i (r_i = F u_i) followed by the
// nine entries of n*F, row-major. F = I at the input structure.
struct CellFilter {
    Lattice reference;
    std::vector<Element> species;
    bool relax_cell;
    double cell_factor;

    int size() const { return static_cast<int>(3 * species.size()) + (relax_cell ? 9 : 0); }

    Mat3 deformation(const Vec& x) const
    {
        if (!relax_cell)
            return Mat3::Identity();
        Mat3 f;
        const int off = static_cast<int>(3 * species.size());
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                f(a, b) = x[off + 3 * a + b] / cell_factor;
        return f;
    }

    CrystalStructure structure(const Vec& x) const
    {
        Mat3 f = deformation(x);
        // Columns a_k = F a0_k, i.e. rows L = L0 F^T.
        Lattice lat(reference.matrix() * f.transpose());
        std::vector<Vec3> frac;
        frac.reserve(species.size());
        for (std::size_t i = 0; i < species.size(); ++i)
            frac.push_back(lat.to_frac(f * x.segment<3>(3 * i)));
        return CrystalStructure(lat, species, std::move(frac));
    }

    Vec generalized_forces(const Vec& x, const Evaluation& ev, double volume) const
    {
        Mat3 f = deformation(x);
        Vec g(size());
        for (std::size_t i = 0; i < species.size(); ++i)
            g.segment<3>(3 * i) = f.transpose() * ev.forces[i];
        if (relax_cell) {
            // dE/dF = V sigma F^-T; the DOF is n F.
            Mat3 cell = -volume * ev.stress * f.inverse().transpose() / cell_factor;
            const int off = static_cast<int>(3 * species.size());
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b)
                    g[off + 3 * a + b] = cell(a, b);
        }
        return g;
    }
};

double max_row_norm(const Vec& g)
{
    double m = 0.0;
    for (Eigen::Index i = 0; i + 2 < g.size(); i += 3)
        m = std::max(m, g.segment<3>(i).norm());
    return m;
}

} // namespace

RelaxResult relax(const Calculator& calc, const CrystalStructure& s, const RelaxOptions& options)
{
    CellFilter filter{s.lattice(), std::vector<Element>(s.species().begin(), s.species().end()), options.relax_cell,
                      static_cast<double>(s.size())};
    Vec x(filter.size());
    auto cart = s.cart_coords();
    for (std::size_t i = 0; i < s.size(); ++i)
        x.segment<3>(3 * i) = cart[i];
    if (options.relax_cell) {
        Mat3 nf = Mat3::Identity() * filter.cell_factor;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                x[3 * s.size() + 3 * a + b] = nf(a, b);
    }

    CrystalStructure current = s;
    Evaluation ev = calc.evaluate(current);
    Vec g = filter.generalized_forces(x, ev, current.volume());

    RelaxResult result{current, ev, {}, false, 0, std::nullopt};
    result.trajectory.push_back({ev.energy, max_row_norm(g), current});

    const FireParams& p = options.fire;
    Vec v = Vec::Zero(x.size());
    double dt = p.dt;
    double alpha = p.a_start;
    int n_positive = 0;

    auto reset = [&] {
        v.setZero();
        dt *= p.f_dec;
        alpha = p.a_start;
        n_positive = 0;
    };

    for (int step = 0; step < options.max_steps; ++step) {
        if (max_row_norm(g) < options.fmax) {
            result.converged = true;
            break;
        }
        result.steps = step + 1;

        double vf = v.dot(g);
        if (vf > 0.0) {
            double gn = g.norm();
            if (gn > 0.0)
                v = (1.0 - alpha) * v + alpha * v.norm() * g / gn;
            if (n_positive > p.n_min) {
                dt = std::min(dt * p.f_inc, p.dt_max);
                alpha *= p.f_a;
            }
            ++n_positive;
        } else {
            v.setZero();
            alpha = p.a_start;
            dt *= p.f_dec;
            n_positive = 0;
        }
        v += dt * g;
        Vec dx = dt * v;
        double norm = dx.norm();
        if (norm > p.max_step)
            dx *= p.max_step / norm;

        Vec trial_x = x + dx;
        std::optional<CrystalStructure> trial;
        Evaluation trial_ev;
        try {
            trial = filter.structure(trial_x);
            trial_ev = calc.evaluate(*trial);
        } catch (const OverlapError&) {
            reset();
            continue;
        } catch (const DegenerateLatticeError&) {
            reset();
            continue;
        } catch (const std::exception& e) {
            result.error = e.what();
            break;
        }
        if (!(trial_ev.energy <= ev.energy)) {
            reset();
            continue;
        }
        x = trial_x;
        current = *trial;
        ev = std::move(trial_ev);
        g = filter.generalized_forces(x, ev, current.volume());
        result.trajectory.push_back({ev.energy, max_row_norm(g), current});
    }
    if (!result.converged && !result.error && max_row_norm(g) < options.fmax)
        result.converged = true;

    result.structure = current;
    result.evaluation = ev;
    return result;
}

} // namespace xtal
