// SPDX-License-Identifier: Apache-2.0
#include "xtal/energy/pair_potential.hpp"

#include <cmath>
#include <sstream>

namespace xtal {

double max_force(const std::vector<Vec3>& forces)
{
    double m = 0.0;
    for (const auto& f : forces)
        m = std::max(m, f.norm());
    return m;
}

PairPotentialCalculator::PairPotentialCalculator(PairPotentialParams params, const ElementTable& table)
    : params_(params), table_(&table)
{
    if (!(params_.epsilon > 0 && params_.sigma_scale > 0 && params_.cutoff > 0 && params_.overlap >= 0))
        throw Error("pair potential parameters must be positive");
}

double PairPotentialCalculator::sigma(Element a, Element b) const
{
    return params_.sigma_scale * ((*table_)[a].covalent_radius + (*table_)[b].covalent_radius);
}

namespace {

double lj(double eps, double sigma, double r)
{
    double s6 = std::pow(sigma / r, 6);
    return 4.0 * eps * (s6 * s6 - s6);
}

// d(phi)/dr
double lj_deriv(double eps, double sigma, double r)
{
    double s6 = std::pow(sigma / r, 6);
    return 4.0 * eps * (-12.0 * s6 * s6 + 6.0 * s6) / r;
}

} // namespace

double PairPotentialCalculator::pair_energy(Element a, Element b, double r) const
{
    if (r >= params_.cutoff)
        return 0.0;
    double sg = sigma(a, b);
    return lj(params_.epsilon, sg, r) - lj(params_.epsilon, sg, params_.cutoff);
}

Evaluation PairPotentialCalculator::evaluate(const CrystalStructure& s) const
{
    const std::size_t n = s.size();
    const Lattice& lat = s.lattice();
    const double rc = params_.cutoff;
    const double rc2 = rc * rc;
    auto range = lat.image_range(rc);

    // Per species-pair constants.
    std::vector<double> sig(n * n), shift(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            sig[i * n + j] = sigma(s.species()[i], s.species()[j]);
            shift[i * n + j] = lj(params_.epsilon, sig[i * n + j], rc);
        }

    Evaluation out;
    out.forces.assign(n, Vec3::Zero());
    Mat3 virial = Mat3::Zero();
    auto frac = s.frac_coords();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            Vec3 df = wrap_centered(frac[j] - frac[i]);
            double sg = sig[i * n + j];
            for (int a = -range[0]; a <= range[0]; ++a)
                for (int b = -range[1]; b <= range[1]; ++b)
                    for (int c = -range[2]; c <= range[2]; ++c) {
                        Vec3 f = df + Vec3(a, b, c);
                        if (i == j && a == 0 && b == 0 && c == 0)
                            continue;
                        Vec3 d = lat.to_cart(f);
                        double r2 = d.squaredNorm();
                        if (r2 >= rc2)
                            continue;
                        double r = std::sqrt(r2);
                        if (r < params_.overlap) {
                            std::ostringstream msg;
                            msg << "sites " << i << " and " << j << " overlap at " << r << " A";
                            throw OverlapError(msg.str());
                        }
                        // Each pair is visited from both ends, hence the halves.
                        out.energy += 0.5 * (lj(params_.epsilon, sg, r) - shift[i * n + j]);
                        double dphi = lj_deriv(params_.epsilon, sg, r);
                        out.forces[i] += dphi * d / r;
                        virial += 0.5 * dphi / r * (d * d.transpose());
                    }
        }
    }
    out.stress = virial / lat.volume();
    return out;
}

} // namespace xtal
