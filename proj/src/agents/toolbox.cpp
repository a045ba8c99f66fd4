// SPDX-License-Identifier: Apache-2.0
#include "xtal/agents/toolbox.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "xtal/energy/relax.hpp"
#include "xtal/symmetry/symmetry.hpp"
#include "xtal/validity/validity.hpp"

namespace xtal {

std::string to_string(ParamType t)
{
    switch (t) {
    case ParamType::Any: return "any";
    case ParamType::Bool: return "bool";
    case ParamType::Integer: return "integer";
    case ParamType::Number: return "number";
    case ParamType::String: return "string";
    case ParamType::Structure: return "structure";
    case ParamType::Structures: return "structures";
    case ParamType::List: return "list";
    case ParamType::Object: return "object";
    }
    return "any";
}

namespace {

bool is_structure_like(const Value& v)
{
    if (v.kind() == Value::Kind::Structure)
        return true;
    return v.kind() == Value::Kind::Object && v.contains("structure") &&
           v.at("structure").kind() == Value::Kind::Structure;
}

} // namespace

bool value_matches(const Value& v, ParamType t, std::string* why)
{
    using K = Value::Kind;
    bool ok = false;
    switch (t) {
    case ParamType::Any: ok = true; break;
    case ParamType::Bool: ok = v.kind() == K::Bool; break;
    case ParamType::Integer: ok = v.kind() == K::Integer; break;
    case ParamType::Number: ok = v.kind() == K::Number || v.kind() == K::Integer; break;
    case ParamType::String: ok = v.kind() == K::String; break;
    case ParamType::Structure: ok = is_structure_like(v); break;
    case ParamType::Structures:
        ok = v.kind() == K::List && std::all_of(v.as_list().begin(), v.as_list().end(), is_structure_like);
        break;
    case ParamType::List: ok = v.kind() == K::List; break;
    case ParamType::Object: ok = v.kind() == K::Object; break;
    }
    if (!ok && why) {
        *why = "expected " + to_string(t) + ", got " + to_string(v.kind());
        if (t == ParamType::Structures && v.kind() == K::List)
            *why += " with non-structure items";
    }
    return ok;
}

const CrystalStructure& structure_arg(const Value& v)
{
    return v.kind() == Value::Kind::Structure ? v.as_structure() : v.at("structure").as_structure();
}

std::vector<CrystalStructure> structures_arg(const Value& v)
{
    std::vector<CrystalStructure> out;
    for (const auto& item : v.as_list())
        out.push_back(structure_arg(item));
    return out;
}

const ToolParam* ToolSignature::find(const std::string& param) const
{
    for (const auto& p : params)
        if (p.name == param)
            return &p;
    return nullptr;
}

std::string ToolSignature::render() const
{
    std::string out = name + "(";
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& p = params[i];
        out += (i ? ", " : "") + p.name + (p.default_value ? "?" : "") + ": " + to_string(p.type);
        if (p.default_value)
            out += " = " + p.default_value->to_json().dump();
    }
    return out + ") -> " + returns + ": " + description;
}

void Toolbox::add(ToolSignature signature, ToolFunction fn)
{
    if (tools_.count(signature.name))
        throw Error("tool '" + signature.name + "' is already registered");
    std::string name = signature.name;
    tools_.emplace(std::move(name), Entry{std::move(signature), std::move(fn)});
}

const ToolSignature& Toolbox::signature(const std::string& name) const
{
    auto it = tools_.find(name);
    if (it == tools_.end())
        throw Error("unknown tool '" + name + "'");
    return it->second.signature;
}

std::vector<const ToolSignature*> Toolbox::signatures() const
{
    std::vector<const ToolSignature*> out;
    for (const auto& [name, e] : tools_)
        out.push_back(&e.signature);
    return out;
}

Value Toolbox::invoke(const std::string& name, ToolArgs args, const ToolEnvironment& env) const
{
    auto it = tools_.find(name);
    if (it == tools_.end())
        throw Error("unknown tool '" + name + "'");
    const auto& sig = it->second.signature;
    for (const auto& [k, v] : args)
        if (!sig.find(k))
            throw Error(name + ": unexpected argument '" + k + "'");
    for (const auto& p : sig.params) {
        auto a = args.find(p.name);
        if (a == args.end()) {
            if (!p.default_value)
                throw Error(name + ": missing required argument '" + p.name + "'");
            args.emplace(p.name, *p.default_value);
            continue;
        }
        std::string why;
        if (!value_matches(a->second, p.type, &why))
            throw Error(name + ": argument '" + p.name + "' " + why);
    }
    return it->second.fn(args, env);
}

std::string Toolbox::catalog() const
{
    std::string out;
    for (const auto& [name, e] : tools_)
        out += "- " + e.signature.render() + "\n";
    return out;
}

double toy_bandgap(const CrystalStructure& s)
{
    const auto& table = ElementTable::builtin();
    double lo = 1e300, hi = -1e300;
    for (Element e : s.composition().elements()) {
        double en = table[e].electronegativity.value_or(0.0);
        lo = std::min(lo, en);
        hi = std::max(hi, en);
    }
    return 1.5 * (hi - lo);
}

namespace {

ToolParam required(std::string name, ParamType t, std::string description = {})
{
    return {std::move(name), t, std::nullopt, std::move(description)};
}

ToolParam optional(std::string name, ParamType t, Value def, std::string description = {})
{
    return {std::move(name), t, std::move(def), std::move(description)};
}

const Calculator& calculator(const ToolEnvironment& env)
{
    if (!env.calculator)
        throw Error("no energy calculator is configured");
    return *env.calculator;
}

double energy_per_atom(const ToolEnvironment& env, const CrystalStructure& s)
{
    return calculator(env).evaluate(s).energy / static_cast<double>(s.size());
}

// Energy per atom of a candidate: taken from an "energy_per_atom" field when
// present, otherwise evaluated.
double candidate_energy(const ToolEnvironment& env, const Value& v)
{
    if (v.contains("energy_per_atom"))
        return v.at("energy_per_atom").as_number();
    return energy_per_atom(env, structure_arg(v));
}

std::string formula_of(const CrystalStructure& s)
{
    return reduced_formula(s.composition());
}

Value::Object validity_fields(const CrystalStructure& s)
{
    auto r = check_validity(s);
    return {{"structurally_valid", r.structural_ok},
            {"compositionally_valid", r.compositional_ok},
            {"valid", r.valid()},
            {"min_distance", r.min_distance},
            {"volume", r.volume}};
}

Value::Object hull_fields(const ToolEnvironment& env, const CrystalStructure& s, double epa)
{
    if (env.hull.empty())
        throw Error("no convex-hull reference entries are configured");
    auto comp = s.composition();
    auto hull = build_hull(env.hull, comp.elements());
    double e_hull = energy_above_hull({comp, epa, "candidate"}, hull);
    auto flags = classify_stability(e_hull, comp);
    return {{"e_hull", e_hull},
            {"stable", flags.stable},
            {"metastable_0_1", flags.metastable_0_1},
            {"metastable_0_03", flags.metastable_0_03}};
}

Value::Object match_fields(const ToolEnvironment& env, const CrystalStructure& s)
{
    Value::List ids;
    for (std::size_t i : env.index->by_reduced_formula(formula_of(s)))
        if (match(s, env.index->records()[i].structure, env.match).matched)
            ids.emplace_back(env.index->records()[i].id);
    return {{"novel", ids.empty()}, {"matches", ids}};
}

Value::Object symmetry_fields(const CrystalStructure& s, double symprec)
{
    auto sig = prototype_signature(s, symprec);
    return {{"op_count", sig.op_count},
            {"crystal_system", to_string(crystal_system(s.lattice(), symprec))},
            {"signature", sig.to_string()}};
}

std::vector<std::pair<double, Value>> with_energies(const ToolEnvironment& env, const Value& candidates)
{
    std::vector<std::pair<double, Value>> out;
    for (const auto& c : candidates.as_list()) {
        if (!is_structure_like(c))
            throw Error("candidates must be structures or objects with a structure field");
        Value item = c;
        if (c.kind() == Value::Kind::Structure)
            item = Value::Object{{"structure", c}, {"energy_per_atom", candidate_energy(env, c)}};
        out.emplace_back(candidate_energy(env, item), item);
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
}

std::vector<StructureRecord> records_arg(const Value& v)
{
    std::vector<StructureRecord> out;
    for (const auto& item : v.as_list()) {
        std::string id = "item-" + std::to_string(out.size());
        if (item.contains("id") && item.at("id").kind() == Value::Kind::String)
            id = item.at("id").as_string();
        out.push_back({id, structure_arg(item), {}});
    }
    return out;
}

double covalent_volume(const CrystalStructure& s)
{
    const auto& table = ElementTable::builtin();
    double v = 0.0;
    for (Element e : s.species())
        v += std::pow(table[e].covalent_radius, 3);
    return v;
}

} // namespace

Toolbox default_toolbox()
{
    using P = ParamType;
    Toolbox tb;

    tb.add({"query_similar",
            "search the structure database for records with the same or similar composition, best first",
            {required("composition", P::String, "chemical formula, e.g. Ba2Fe2F9"), optional("k", P::Integer, Value(5))},
            "list of records {id, formula, tier, score, structure}"},
           [](const ToolArgs& a, const ToolEnvironment& env) {
               auto comp = Composition::from_formula(a.at("composition").as_string());
               auto k = a.at("k").as_integer();
               if (k < 1)
                   throw Error("k must be at least 1");
               Value::List out;
               for (const auto& h : query_similar(comp, *env.index, static_cast<std::size_t>(k))) {
                   const auto& r = env.index->records()[h.index];
                   out.emplace_back(Value::Object{{"id", r.id},
                                                  {"formula", formula_of(r.structure)},
                                                  {"tier", static_cast<int>(h.tier)},
                                                  {"score", h.score},
                                                  {"structure", r.structure}});
               }
               return Value(out);
           });

    tb.add({"prototype_signatures",
            "symmetry fingerprint of each structure (anonymous formula, operation count, orbits)",
            {required("structures", P::Structures)},
            "list of {formula, op_count, crystal_system, signature}"},
           [](const ToolArgs& a, const ToolEnvironment&) {
               Value::List out;
               for (const auto& s : structures_arg(a.at("structures"))) {
                   auto f = symmetry_fields(s, 0.01);
                   f.emplace("formula", formula_of(s));
                   out.emplace_back(f);
               }
               return Value(out);
           });

    tb.add({"generate_candidates",
            "relabel stoichiometry-compatible prototypes with the target elements and rescale; duplicates removed",
            {required("composition", P::String), required("prototypes", P::Structures), optional("m", P::Integer, Value(5))},
            "list of structures"},
           [](const ToolArgs& a, const ToolEnvironment& env) {
               auto comp = Composition::from_formula(a.at("composition").as_string());
               auto m = a.at("m").as_integer();
               if (m < 1)
                   throw Error("m must be at least 1");
               auto idx = build_index(records_arg(a.at("prototypes")));
               auto cands = generate_candidates(comp, idx, static_cast<std::size_t>(m), {}, env.match);
               if (cands.empty())
                   throw Error("no prototype has the stoichiometry of " + reduced_formula(comp));
               return Value(Value::List(cands.begin(), cands.end()));
           });

    tb.add({"substitute_elements",
            "random chemically similar relabellings of prototypes (|dEN| < 0.5), for unconstrained generation",
            {required("prototypes", P::Structures), required("n", P::Integer), optional("seed", P::Integer, Value(0))},
            "list of structures"},
           [](const ToolArgs& a, const ToolEnvironment&) {
               auto protos = structures_arg(a.at("prototypes"));
               auto n = a.at("n").as_integer();
               if (protos.empty() || n < 1)
                   throw Error("need at least one prototype and n >= 1");
               const auto& table = ElementTable::builtin();
               std::mt19937_64 rng(static_cast<std::uint64_t>(a.at("seed").as_integer()));
               Value::List out;
               for (std::int64_t i = 0; i < n; ++i) {
                   const auto& p = protos[static_cast<std::size_t>(i) % protos.size()];
                   std::map<Element, Element> mapping;
                   std::set<Element> used;
                   for (Element e : p.composition().elements()) {
                       std::vector<Element> pool;
                       for (int z = 1; z <= 83; ++z) {
                           Element c(z);
                           auto en_c = table[c].electronegativity, en_e = table[e].electronegativity;
                           if (en_c && en_e && !table[c].oxidation_states.empty() && !used.count(c) &&
                               std::abs(*en_c - *en_e) < 0.5)
                               pool.push_back(c);
                       }
                       Element pick = e;
                       if (!pool.empty())
                           pick = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
                       if (used.count(pick))
                           throw Error("could not find distinct replacements for " + formula_of(p));
                       used.insert(pick);
                       mapping.emplace(e, pick);
                   }
                   std::vector<Element> species;
                   for (Element e : p.species())
                       species.push_back(mapping.at(e));
                   auto relabelled = p.with_species(species);
                   double f = std::cbrt(covalent_volume(relabelled) / covalent_volume(p));
                   out.emplace_back(relabelled.with_lattice(p.lattice().scaled(f)));
               }
               return Value(out);
           });

    tb.add({"relax",
            "relax atomic positions and cell with the configured force field (FIRE)",
            {required("structures", P::Structures), optional("max_steps", P::Integer, Value(100)),
             optional("fmax", P::Number, Value(0.05), "force threshold, eV/A")},
            "list of {structure, formula, energy_per_atom, converged, steps}"},
           [](const ToolArgs& a, const ToolEnvironment& env) {
               auto steps = a.at("max_steps").as_integer();
               if (steps < 1 || steps > env.max_relax_steps)
                   throw Error("max_steps must be in 1.." + std::to_string(env.max_relax_steps) + ", got " +
                               std::to_string(steps));
               RelaxOptions opt = env.relax;
               opt.max_steps = static_cast<int>(steps);
               opt.fmax = a.at("fmax").as_number();
               Value::List out;
               for (const auto& s : structures_arg(a.at("structures"))) {
                   auto r = relax(calculator(env), s, opt);
                   if (r.error)
                       throw Error("relaxation of " + formula_of(s) + " failed: " + *r.error);
                   out.emplace_back(Value::Object{
                       {"structure", r.structure},
                       {"formula", formula_of(r.structure)},
                       {"energy_per_atom", r.evaluation.energy / static_cast<double>(r.structure.size())},
                       {"converged", r.converged},
                       {"steps", r.steps}});
               }
               return Value(out);
           });

    tb.add({"evaluate_energy",
            "energy per atom (eV/atom) of each structure with the configured force field",
            {required("structures", P::Structures)},
            "list of numbers"},
           [](const ToolArgs& a, const ToolEnvironment& env) {
               Value::List out;
               for (const auto& s : structures_arg(a.at("structures")))
                   out.emplace_back(energy_per_atom(env, s));
               return Value(out);
           });

    tb.add({"rank_by_energy",
            "sort candidates by energy per atom, lowest first (evaluates bare structures)",
            {required("candidates", P::Structures)},
            "list of {structure, energy_per_atom, ...}"},
           [](const ToolArgs& a, const ToolEnvironment& env) {
               Value::List out;
               for (auto& [e, item] : with_energies(env, a.at("candidates")))
                   out.push_back(item);
               return Value(out);
           });

    tb.add({"select_lowest",
            "the candidate with the lowest energy per atom",
            {required("candidates", P::Structures)},
            "{structure, energy_per_atom, ...}"},
           [](const ToolArgs& a, const ToolEnvironment& env) {
               auto ranked = with_energies(env, a.at("candidates"));
               if (ranked.empty())
                   throw Error("no candidates to select from");
               return ranked.front().second;
           });

    tb.add({"check_validity",
            "structural (min distance >= 0.5 A, volume >= 0.1 A^3) and compositional (charge balance) validity",
            {required("structure", P::Structure)},
            "{structurally_valid, compositionally_valid, valid, min_distance, volume}"},
           [](const ToolArgs& a, const ToolEnvironment&) { return Value(validity_fields(structure_arg(a.at("structure")))); });

    tb.add({"filter_valid",
            "keep only structurally and compositionally valid structures",
            {required("structures", P::Structures)},
            "list (same items)"},
           [](const ToolArgs& a, const ToolEnvironment&) {
               Value::List out;
               for (const auto& item : a.at("structures").as_list())
                   if (check_validity(structure_arg(item)).valid())
                       out.push_back(item);
               return Value(out);
           });

    tb.add({"energy_above_hull",
            "energy above the convex hull of the configured reference entries, with stability flags",
            {required("structure", P::Structure),
             optional("energy_per_atom", P::Any, Value(), "eV/atom; evaluated when null")},
            "{e_hull, stable, metastable_0_1, metastable_0_03}"},
           [](const ToolArgs& a, const ToolEnvironment& env) {
               const auto& s = structure_arg(a.at("structure"));
               const Value& given = a.at("energy_per_atom");
               double epa = given.is_null() ? candidate_energy(env, a.at("structure")) : given.as_number();
               return Value(hull_fields(env, s, epa));
           });

    tb.add({"match_references",
            "compare a structure with database records of the same formula using the structure matcher",
            {required("structure", P::Structure)},
            "{novel, matches: [ids]}"},
           [](const ToolArgs& a, const ToolEnvironment& env) { return Value(match_fields(env, structure_arg(a.at("structure")))); });

    tb.add({"analyze_symmetry",
            "space-group operation count, crystal system and prototype signature",
            {required("structure", P::Structure), optional("symprec", P::Number, Value(0.01), "A")},
            "{op_count, crystal_system, signature}"},
           [](const ToolArgs& a, const ToolEnvironment&) {
               return Value(symmetry_fields(structure_arg(a.at("structure")), a.at("symprec").as_number()));
           });

    tb.add({"dedup_structures",
            "remove structures that match an earlier one",
            {required("structures", P::Structures)},
            "list (first of each group)"},
           [](const ToolArgs& a, const ToolEnvironment& env) {
               const auto& items = a.at("structures").as_list();
               Value::List out;
               for (const auto& g : dedup(structures_arg(a.at("structures")), env.match))
                   out.push_back(items[static_cast<std::size_t>(g.front())]);
               return Value(out);
           });

    tb.add({"estimate_bandgap",
            "toy band-gap proxy from the electronegativity spread (not a physical model)",
            {required("structures", P::Structures)},
            "list of {structure, formula, bandgap}"},
           [](const ToolArgs& a, const ToolEnvironment&) {
               Value::List out;
               for (const auto& s : structures_arg(a.at("structures")))
                   out.emplace_back(Value::Object{{"structure", s}, {"formula", formula_of(s)}, {"bandgap", toy_bandgap(s)}});
               return Value(out);
           });

    tb.add({"filter_by_property",
            "keep objects whose numeric field lies in [minimum, maximum]",
            {required("candidates", P::List), required("property", P::String),
             optional("minimum", P::Number, Value(-1e300)), optional("maximum", P::Number, Value(1e300))},
            "list (same items)"},
           [](const ToolArgs& a, const ToolEnvironment&) {
               const auto& field = a.at("property").as_string();
               double lo = a.at("minimum").as_number(), hi = a.at("maximum").as_number();
               Value::List out;
               for (const auto& item : a.at("candidates").as_list()) {
                   double x = item.at(field).as_number();
                   if (x >= lo && x <= hi)
                       out.push_back(item);
               }
               return Value(out);
           });

    tb.add({"summarize_candidate",
            "final report for one candidate: energy, validity, hull stability (when references exist), novelty, symmetry",
            {required("candidate", P::Structure)},
            "{structure, formula, energy_per_atom, valid, e_hull?, novel, matches, op_count, ...}"},
           [](const ToolArgs& a, const ToolEnvironment& env) {
               const Value& c = a.at("candidate");
               const auto& s = structure_arg(c);
               double epa = candidate_energy(env, c);
               Value::Object out{{"structure", s}, {"formula", formula_of(s)}, {"energy_per_atom", epa}};
               for (auto& kv : validity_fields(s))
                   out.insert(kv);
               if (!env.hull.empty())
                   for (auto& kv : hull_fields(env, s, epa))
                       out.insert(kv);
               for (auto& kv : match_fields(env, s))
                   out.insert(kv);
               for (auto& kv : symmetry_fields(s, 0.01))
                   out.insert(kv);
               return Value(out);
           });

    return tb;
}

} // namespace xtal
