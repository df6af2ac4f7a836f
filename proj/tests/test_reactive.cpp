#include "fracnet/dfn.hpp"
#include "fracnet/reactive.hpp"

#include <doctest.h>

#include <cmath>

using namespace fracnet;

namespace {

// One fracture spanning the box from inlet to outlet: a single well-mixed cell.
FractureNetwork single_cell(double total_volume = 0.0)
{
  FractureNetwork net;
  const Fracture disc = make_disc_fracture(0, Vector3d(5, 5, 5), Vector3d::UnitZ(), 6.0, 1e-5, 32);
  auto f = truncate_to_domain(disc, net.domain);
  REQUIRE(f);
  REQUIRE(f->touches_inlet);
  REQUIRE(f->touches_outlet);
  if (total_volume > 0.0)
    f->total_volume = total_volume;
  net.fractures.push_back(*f);
  return net;
}

FractureNetwork sample_network(std::uint64_t seed)
{
  GenerationParams params;
  params.target_p32 = 1.0;
  for (std::uint64_t s = seed;; ++s)
    if (auto net = generate_network(params, s).network)
      return *net;
}

ReactiveCell fresh_cell(double total_volume = 7.07e-5)
{
  const ChemistryConstants chem;
  ReactiveCell c;
  c.total_volume = total_volume;
  c.initial_porosity = c.porosity = 0.2;
  c.mineral_fraction = 0.8;
  c.initial_quartz_volume = c.quartz_volume = 0.8 * total_volume;
  c.fluid_volume = 0.2 * total_volume;
  c.initial_area = c.quartz_area = chem.area_per_volume() * c.initial_quartz_volume;
  return c;
}

// Closed-form steady silica (mol/m^3) of one cell fed at c_in with flow q.
double one_cell_silica(double k, double area, double q, double c_in, double k_eq)
{
  return (q * c_in + k * area) / (q + k * area / k_eq);
}

} // namespace

TEST_SUITE("reactive")
{
  TEST_CASE("chemistry constants")
  {
    const ChemistryConstants chem;
    CHECK(chem.equilibrium_constant == std::pow(10.0, -3.9993));
    CHECK(chem.equilibrium_mol_per_m3() == doctest::Approx(1000.0 * std::pow(10.0, -3.9993)).epsilon(1e-15));
    CHECK(chem.area_per_volume() == doctest::Approx(0.0225 * 1000.0 * 2650.0).epsilon(1e-15));
  }

  TEST_CASE("initial state of a full disc")
  {
    const ReactiveSimulation sim(single_cell(7.07e-5), 1e-12);
    const auto& c = sim.state().cells.front();
    CHECK(c.initial_quartz_volume == doctest::Approx(5.657e-5).epsilon(1e-3));
    CHECK(c.fluid_volume == doctest::Approx(1.414e-5).epsilon(1e-3));
    CHECK(c.initial_area == doctest::Approx(3.373).epsilon(1e-3));
    CHECK(c.mineral_fraction == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(std::abs(c.porosity - (1.0 - c.mineral_fraction)) <= 1e-12);
    CHECK(c.silica == sim.chemistry().equilibrium_constant);
    CHECK(dissolution_rate(c, c.silica, 1e-12, sim.chemistry()) == 0.0);
  }

  TEST_CASE("TST rate")
  {
    const ChemistryConstants chem;
    const ReactiveCell c = fresh_cell();
    const double far = dissolution_rate(c, 0.0, 1e-10, chem);
    CHECK(far == doctest::Approx(1e-10 * c.quartz_area / c.fluid_volume).epsilon(1e-14));
    CHECK(dissolution_rate(c, chem.equilibrium_constant, 1e-10, chem) == 0.0);
    CHECK(dissolution_rate(c, 0.5 * chem.equilibrium_constant, 1e-10, chem) ==
          doctest::Approx(0.5 * far).epsilon(1e-14));
    CHECK(dissolution_rate(c, 2.0 * chem.equilibrium_constant, 1e-10, chem) == 0.0);
    ReactiveCell empty = c;
    empty.quartz_volume = 0.0;
    CHECK(dissolution_rate(empty, 0.0, 1e-10, chem) == 0.0);
    CHECK_THROWS(dissolution_rate(c, -1.0, 1e-10, chem));
  }

  TEST_CASE("geometry update")
  {
    const ChemistryConstants chem;
    const PermeabilityLaw law;
    const ReactiveCell c = fresh_cell();

    const auto same = update_geometry_chemistry(c, 0.0, chem, law);
    CHECK(same.cell.quartz_volume == c.quartz_volume);
    CHECK(same.cell.quartz_area == c.quartz_area);
    CHECK(same.cell.permeability_factor == 1.0);

    const double seven_eighths = 7.0 / 8.0 * c.initial_quartz_volume / chem.molar_volume;
    const auto eighth = update_geometry_chemistry(c, seven_eighths, chem, law);
    CHECK(eighth.cell.quartz_volume == doctest::Approx(c.initial_quartz_volume / 8.0).epsilon(1e-12));
    CHECK(std::abs(eighth.cell.quartz_area - c.initial_area / 4.0) <= 1e-12 * c.initial_area);
    CHECK(std::abs(eighth.cell.porosity - (1.0 - eighth.cell.mineral_fraction)) <= 1e-12);
    CHECK(eighth.cell.fluid_volume == doctest::Approx(eighth.cell.porosity * c.total_volume).epsilon(1e-14));
    CHECK(eighth.cell.permeability_factor > 1.0);

    // Area follows (V/V_o)^{2/3} over the whole range.
    for (double frac : {0.9, 0.5, 0.1, 1e-3}) {
      const double moles = (1.0 - frac) * c.initial_quartz_volume / chem.molar_volume;
      const auto u = update_geometry_chemistry(c, moles, chem, law);
      const double ratio = u.cell.quartz_volume / u.cell.initial_quartz_volume;
      CHECK(std::abs(u.cell.quartz_area - std::pow(ratio, 2.0 / 3.0) * c.initial_area) <= 1e-12 * c.initial_area);
    }

    const double all = c.quartz_volume / chem.molar_volume;
    const auto over = update_geometry_chemistry(c, 1.5 * all, chem, law);
    CHECK(over.cell.quartz_volume == 0.0);
    CHECK(over.cell.quartz_area == 0.0);
    CHECK(over.dissolved_moles == doctest::Approx(all).epsilon(1e-15));
    CHECK(over.clamped_moles == doctest::Approx(0.5 * all).epsilon(1e-12));
    CHECK(over.cell.porosity == 1.0);
    CHECK_THROWS(update_geometry_chemistry(c, -1.0, chem, law));
  }

  TEST_CASE("permeability law")
  {
    const PermeabilityLaw law;
    CHECK(law.factor(0.2, 0.2) == 1.0);
    CHECK(law.factor(0.01, 0.2) == law.f_min);
    CHECK(law.factor(0.005, 0.2) == law.f_min);
    double previous = law.factor(0.0100001, 0.2);
    for (double phi = 0.011; phi <= 1.0; phi += 0.001) {
      const double f = law.factor(phi, 0.2);
      CHECK(f >= previous);
      previous = f;
    }
    CHECK(law.factor(1.0, 0.2) == doctest::Approx(std::pow(0.99 / 0.19, 3.0)).epsilon(1e-14));
  }

  TEST_CASE("single cell silica matches the closed form")
  {
    const FractureNetwork net = single_cell();
    for (double k : {1e-14, 1e-12, 1e-10, 1e-6}) {
      ReactiveSimulation sim(net, k);
      const auto t = sim.solve_transport();
      const auto& cell = sim.state().cells.front();
      const ChemistryConstants& chem = sim.chemistry();
      const double expected = one_cell_silica(k, cell.quartz_area, sim.total_rate(),
                                              chem.inflow_silica * 1000.0, chem.equilibrium_mol_per_m3());
      CHECK(t.silica(0) * 1000.0 == doctest::Approx(expected).epsilon(1e-10));
      CHECK(t.silica(0) <= chem.equilibrium_constant + 1e-12);
    }
    // Kinetically fast: saturated outflow, export at Q K_eq.
    ReactiveSimulation fast(net, 1.0);
    const auto t = fast.solve_transport();
    CHECK(t.silica(0) == doctest::Approx(fast.chemistry().equilibrium_constant).epsilon(1e-6));
    CHECK(t.export_rate ==
          doctest::Approx(fast.total_rate() * fast.chemistry().equilibrium_mol_per_m3()).epsilon(1e-6));
  }

  TEST_CASE("single cell trajectory follows a fine-step integrator")
  {
    const FractureNetwork net = single_cell();
    for (double k : {1e-13, 1e-12, 1e-11}) {
      ReactiveSimulation sim(net, k);
      const ChemistryConstants& chem = sim.chemistry();
      const auto& c0 = sim.state().cells.front();
      const double q = sim.total_rate();
      const double k_eq = chem.equilibrium_mol_per_m3();
      const double c_in = chem.inflow_silica * 1000.0;
      const double v0 = c0.initial_quartz_volume, a0 = c0.initial_area;

      auto dvdt = [&](double v) {
        if (v <= 0.0)
          return 0.0;
        const double area = a0 * std::pow(v / v0, 2.0 / 3.0);
        const double c = one_cell_silica(k, area, q, c_in, k_eq);
        return -chem.molar_volume * k * area * (1.0 - c / k_eq);
      };
      // RK4 with each step losing at most 0.1% of V_o.
      double t_ref = 0.0, v_ref = v0;
      auto advance_to = [&](double t_end) {
        while (t_ref < t_end) {
          const double h = std::min(t_end - t_ref, 1e-3 * v0 / std::max(-dvdt(v_ref), 1e-300));
          const double k1 = dvdt(v_ref);
          const double k2 = dvdt(std::max(v_ref + 0.5 * h * k1, 0.0));
          const double k3 = dvdt(std::max(v_ref + 0.5 * h * k2, 0.0));
          const double k4 = dvdt(std::max(v_ref + h * k3, 0.0));
          v_ref = std::max(v_ref + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), 0.0);
          t_ref += h;
          if (v_ref == 0.0)
            t_ref = t_end;
        }
      };

      double worst = 0.0;
      while (sim.state().cells.front().quartz_volume > 0.05 * v0 &&
             sim.state().time < 1e7 * kSecondsPerYear * (1 - 1e-12)) {
        sim.advance();
        advance_to(sim.state().time);
        worst = std::max(worst, std::abs(sim.state().cells.front().quartz_volume - v_ref) / v0);
      }
      CHECK(worst <= 0.01);
    }
  }

  TEST_CASE("zero rate constant leaves all quartz in place")
  {
    ReactiveSimulation sim(sample_network(30), 0.0);
    const auto result = sim.run_to_quasi_steady();
    CHECK(result.reached_quasi_steady);
    CHECK((sim.remaining_fractions().array() == 1.0).all());
    const auto t = sim.solve_transport();
    for (Eigen::Index i = 0; i < t.silica.size(); ++i)
      if (sim.state().flow.fracture_q(i) > 0.0)
        CHECK(t.silica(i) == doctest::Approx(sim.chemistry().inflow_silica).epsilon(1e-9));
  }

  TEST_CASE("equilibrium inflow is a fixed point")
  {
    ChemistryConstants chem;
    chem.inflow_silica = chem.equilibrium_constant;
    ReactiveSimulation sim(sample_network(31), 1e-9, chem);
    for (int s = 0; s < 5; ++s) {
      const auto report = sim.step(1e4 * kSecondsPerYear);
      CHECK(report.removed == 0.0);
    }
    CHECK((sim.remaining_fractions().array() == 1.0).all());
    CHECK(sim.state().time == doctest::Approx(5e4 * kSecondsPerYear));
  }

  TEST_CASE("mass ledger, monotone dissolution and bounded concentrations on a generated network")
  {
    const FractureNetwork net = sample_network(32);
    for (double k : {1e-9, 1e-12}) {
      ReactiveSimulation sim(net, k);
      std::vector<double> previous;
      for (const auto& c : sim.state().cells)
        previous.push_back(c.quartz_volume);
      double last_time = 0.0;
      bool monotone = true, bounded = true;
      for (int s = 0; s < 400 && sim.state().time < 1e7 * kSecondsPerYear * (1 - 1e-12); ++s) {
        sim.advance();
        CHECK(sim.state().time >= last_time);
        last_time = sim.state().time;
        for (std::size_t i = 0; i < previous.size(); ++i) {
          const auto& c = sim.state().cells[i];
          monotone = monotone && c.quartz_volume <= previous[i];
          bounded = bounded && c.silica >= 0.0 && c.silica <= sim.chemistry().equilibrium_constant + 1e-12;
          previous[i] = c.quartz_volume;
        }
      }
      CHECK(monotone);
      CHECK(bounded);
      CHECK(sim.state().ledger.max_step_error <= 1e-3);
      CHECK(sim.state().ledger.cumulative_error() <= 1e-2);
      const Eigen::VectorXd r = sim.remaining_fractions();
      CHECK((r.array() >= 0.0).all());
      CHECK((r.array() <= 1.0).all());
    }
  }

  TEST_CASE("stiff and invalid steps are rejected")
  {
    ReactiveSimulation sim(single_cell(), 1e-12);
    CHECK_THROWS(sim.step(0.0));
    CHECK_THROWS(sim.step(0.5));
    CHECK_THROWS(ReactiveSimulation(single_cell(), -1.0));
  }
}
