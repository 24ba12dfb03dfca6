#include "lifetraj/parallel.hpp"
#include "lifetraj/registerdata.hpp"
#include "lifetraj/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace lifetraj {

namespace {

// Fixed codes the generator gives meaning to. They must exist in the codebook.
namespace codes {
constexpr Code kChildNone = 0, kChildYes = 1, kChildGrown = 2;
constexpr Code kMarried = 1, kSingle = 2, kCohabiting = 3, kDivorced = 4, kWidowed = 5;
constexpr Code kEmployed = 1, kSelfEmployed = 2, kUnemployed = 3, kStudying = 4, kOutside = 5, kRetired = 6;
constexpr Code kSalary = 1, kBusiness = 2, kPension = 3, kUnemploymentBenefit = 4, kStudentAid = 5,
               kSickness = 6, kSocialAssistance = 7;
constexpr Code kGeneralEducation = 10;
} // namespace codes

// Substream ids for the counter-based per-person generators.
enum Stream : std::uint64_t { kAttributes = 1, kLife = 2, kMoves = 3, kResidence = 4, kWork = 5 };

struct LifeState {
    int age = 0;
    Code child = 0;
    Code family = 0;
    Code edu_level = 0;
    Code edu_field = 0;
    Code employment = 0;
    Code occupation = 0;  // canonical (earliest) occupation scheme
    Code industry = 0;    // canonical (earliest) industry scheme
    int income = 0;
    Code income_source = 0;
    bool support = false;
};

struct PersonPlan {
    Code sex = 1;
    int first_obs = 0;
    int last_obs = 0;
    std::vector<char> observed;   // indexed by year - first_obs
    double propensity = 1.0;
    std::vector<LifeState> life;  // indexed by year - first_obs
    std::vector<double> move_draw;  // indexed by year - first_year
    std::uint64_t occupation_pick = 0;
    std::uint64_t industry_pick = 0;
};

struct Pools {
    std::vector<Code> municipalities;
    std::vector<Code> regions;
    std::vector<Code> fields;  // excluding general education
    std::vector<Code> occupations;
    std::vector<Code> industries;
    std::string occupation_scheme;
    std::string industry_scheme;
    // Active schemes per year offset from first_year.
    std::vector<std::string> occupation_schemes;
    std::vector<std::string> industry_schemes;
};

std::vector<Code> codes_of(const CodeDictionary& d) {
    std::vector<Code> out;
    out.reserve(d.entries.size());
    for (const auto& [c, _] : d.entries) {
        out.push_back(c);
    }
    return out;
}

void require_codes(const Codebook& book, Variable var, int year, std::initializer_list<Code> required) {
    const std::string& scheme = book.resolve_scheme(var, year);
    for (Code c : required) {
        if (book.try_lookup(scheme, year, c) == nullptr) {
            throw ConfigError("codebook", "scheme " + scheme + " lacks code " + std::to_string(c) +
                                              " required by the generator");
        }
    }
}

Pools make_pools(const SynthConfig& cfg, const Codebook& book) {
    using namespace codes;
    const int y0 = cfg.first_year;
    require_codes(book, Variable::Sex, y0, {1, 2});
    require_codes(book, Variable::ChildStatus, y0, {kChildNone, kChildYes, kChildGrown});
    require_codes(book, Variable::FamilyRelation, y0, {kMarried, kSingle, kCohabiting, kDivorced, kWidowed});
    require_codes(book, Variable::EducationLevel, y0, {1, 2, 3, 4, 5, 6, 7});
    require_codes(book, Variable::EducationField, y0, {kGeneralEducation});
    require_codes(book, Variable::Employment, y0,
                  {kEmployed, kSelfEmployed, kUnemployed, kStudying, kOutside, kRetired});
    require_codes(book, Variable::IncomeSource, y0,
                  {kSalary, kBusiness, kPension, kUnemploymentBenefit, kStudentAid, kSickness, kSocialAssistance});
    require_codes(book, Variable::GovernmentSupport, y0, {0, 1});

    Pools p;
    const auto all_mun = codes_of(book.dictionary(book.resolve_scheme(Variable::Residence, y0), y0));
    if (cfg.n_municipalities > all_mun.size()) {
        throw ConfigError("n_municipalities", "codebook has only " + std::to_string(all_mun.size()) +
                                                  " municipality codes");
    }
    p.municipalities.assign(all_mun.begin(), all_mun.begin() + static_cast<std::ptrdiff_t>(cfg.n_municipalities));
    p.regions = codes_of(book.dictionary(book.resolve_scheme(Variable::LaborMarketRegion, y0), y0));
    for (Code c : codes_of(book.dictionary(book.resolve_scheme(Variable::EducationField, y0), y0))) {
        if (c != kGeneralEducation) {
            p.fields.push_back(c);
        }
    }
    p.occupation_scheme = book.resolve_scheme(Variable::Occupation, y0);
    p.industry_scheme = book.resolve_scheme(Variable::Industry, y0);
    p.occupations = codes_of(book.dictionary(p.occupation_scheme, y0));
    p.industries = codes_of(book.dictionary(p.industry_scheme, y0));
    if (p.regions.empty() || p.fields.empty() || p.occupations.empty() || p.industries.empty()) {
        throw ConfigError("codebook", "empty code pool for the generator");
    }
    for (int y = cfg.first_year; y <= cfg.last_year; ++y) {
        p.occupation_schemes.push_back(book.resolve_scheme(Variable::Occupation, y));
        p.industry_schemes.push_back(book.resolve_scheme(Variable::Industry, y));
    }
    return p;
}

// Maps a canonical code into `target` scheme by following crosswalks; the
// per-person pick chooses among split targets.
Code recode(const Codebook& book, const std::string& from, const std::string& target, Code code,
            std::uint64_t pick) {
    std::string scheme = from;
    for (int hops = 0; scheme != target; ++hops) {
        const Crosswalk* cw = book.crosswalk_from(scheme);
        if (cw == nullptr || hops > 8) {
            throw ConfigError("codebook", "no crosswalk path from " + from + " to " + target);
        }
        const auto& targets = crosswalk_map(*cw, code);
        auto it = targets.begin();
        std::advance(it, static_cast<std::ptrdiff_t>(pick % targets.size()));
        code = *it;
        scheme = cw->to_scheme;
    }
    return code;
}

template <std::size_t N>
Code pick_weighted(Rng& rng, const std::pair<Code, double> (&table)[N]) {
    double total = 0;
    for (const auto& [_, w] : table) {
        total += w;
    }
    double u = rng.uniform() * total;
    for (const auto& [c, w] : table) {
        if (u < w) {
            return c;
        }
        u -= w;
    }
    return table[N - 1].first;
}

Code income_source_for(Code employment, Rng& rng) {
    using namespace codes;
    switch (employment) {
    case kEmployed: return kSalary;
    case kSelfEmployed: return kBusiness;
    case kUnemployed: return kUnemploymentBenefit;
    case kStudying: return kStudentAid;
    case kRetired: return kPension;
    default: return rng.bernoulli(0.6) ? kSickness : kSocialAssistance;
    }
}

double support_probability(Code employment) {
    using namespace codes;
    switch (employment) {
    case kUnemployed:
    case kOutside: return 0.6;
    case kStudying: return 0.2;
    default: return 0.04;
    }
}

Code draw_employment(Rng& rng, int age) {
    using namespace codes;
    if (age >= 65) {
        return rng.bernoulli(0.9) ? kRetired : kEmployed;
    }
    if (age < 20) {
        static constexpr std::pair<Code, double> t[] = {{kStudying, 0.6}, {kEmployed, 0.3}, {kUnemployed, 0.1}};
        return pick_weighted(rng, t);
    }
    if (age < 26) {
        static constexpr std::pair<Code, double> t[] = {
            {kStudying, 0.3}, {kEmployed, 0.55}, {kUnemployed, 0.1}, {kOutside, 0.05}};
        return pick_weighted(rng, t);
    }
    static constexpr std::pair<Code, double> t[] = {
        {kEmployed, 0.78}, {kSelfEmployed, 0.07}, {kUnemployed, 0.07}, {kOutside, 0.08}};
    return pick_weighted(rng, t);
}

LifeState initial_state(Rng& rng, int age, const Pools& pools) {
    using namespace codes;
    LifeState s;
    s.age = age;

    if (age < 20) {
        s.child = kChildNone;
    } else if (age < 50) {
        s.child = rng.bernoulli(std::min(0.8, (age - 20) / 20.0)) ? kChildYes : kChildNone;
    } else if (age < 60) {
        static constexpr std::pair<Code, double> t[] = {{kChildYes, 0.55}, {kChildGrown, 0.25}, {kChildNone, 0.2}};
        s.child = pick_weighted(rng, t);
    } else {
        s.child = rng.bernoulli(0.75) ? kChildGrown : kChildNone;
    }

    if (age < 25) {
        static constexpr std::pair<Code, double> t[] = {{kSingle, 0.8}, {kCohabiting, 0.2}};
        s.family = pick_weighted(rng, t);
    } else if (age < 40) {
        static constexpr std::pair<Code, double> t[] = {{kMarried, 0.4}, {kCohabiting, 0.3}, {kSingle, 0.3}};
        s.family = pick_weighted(rng, t);
    } else if (age < 65) {
        static constexpr std::pair<Code, double> t[] = {
            {kMarried, 0.6}, {kCohabiting, 0.15}, {kSingle, 0.1}, {kDivorced, 0.15}};
        s.family = pick_weighted(rng, t);
    } else {
        static constexpr std::pair<Code, double> t[] = {
            {kMarried, 0.55}, {kWidowed, 0.2}, {kDivorced, 0.1}, {kSingle, 0.15}};
        s.family = pick_weighted(rng, t);
    }

    if (age < 19) {
        s.edu_level = rng.bernoulli(0.7) ? 2 : 1;
    } else {
        static constexpr std::pair<Code, double> young[] = {{2, 0.15}, {3, 0.25}, {4, 0.15}, {5, 0.1}, {6, 0.3},
                                                            {7, 0.05}};
        static constexpr std::pair<Code, double> old[] = {{1, 0.1}, {2, 0.25}, {3, 0.25}, {4, 0.15}, {5, 0.08},
                                                          {6, 0.15}, {7, 0.02}};
        s.edu_level = age < 50 ? pick_weighted(rng, young) : pick_weighted(rng, old);
    }
    s.edu_field = s.edu_level <= 2 ? kGeneralEducation : pools.fields[rng.below(pools.fields.size())];

    s.employment = draw_employment(rng, age);
    s.occupation = pools.occupations[rng.below(pools.occupations.size())];
    s.industry = pools.industries[rng.below(pools.industries.size())];

    double income = age < 25 ? 25 : age < 35 ? 45 : age < 55 ? 55 : 50;
    income += 20 * rng.normal();
    if (s.employment == kUnemployed || s.employment == kStudying) {
        income -= 20;
    }
    s.income = std::clamp(static_cast<int>(std::lround(income)), 0, 100);
    s.income_source = income_source_for(s.employment, rng);
    s.support = rng.bernoulli(support_probability(s.employment));
    return s;
}

void advance_state(LifeState& s, Rng& rng, const Pools& pools) {
    using namespace codes;
    ++s.age;
    const bool young = s.age < 35;

    if (s.child == kChildNone && s.age >= 22 && s.age <= 42) {
        if (rng.bernoulli(0.12)) {
            s.child = kChildYes;
        }
    } else if (s.child == kChildNone && s.age < 45) {
        if (rng.bernoulli(0.01)) {
            s.child = kChildYes;
        }
    } else if (s.child == kChildYes && s.age >= 50) {
        if (rng.bernoulli(0.12)) {
            s.child = kChildGrown;
        }
    }

    if (rng.bernoulli(s.age < 40 ? 0.07 : 0.03)) {
        switch (s.family) {
        case kSingle: s.family = kCohabiting; break;
        case kCohabiting: s.family = rng.bernoulli(0.6) ? kMarried : kSingle; break;
        case kMarried: s.family = (s.age > 65 && rng.bernoulli(0.6)) ? kWidowed : kDivorced; break;
        default: s.family = rng.bernoulli(0.5) ? kCohabiting : kSingle; break;
        }
    }

    if (s.age < 35 && s.edu_level < 7 && rng.bernoulli(s.age < 26 ? 0.15 : 0.05)) {
        s.edu_level = std::max<Code>(s.edu_level + 1, 3);
        if (s.edu_field == kGeneralEducation || rng.bernoulli(0.3)) {
            s.edu_field = pools.fields[rng.below(pools.fields.size())];
        }
    }

    const Code before = s.employment;
    if (s.age >= 65 && s.employment != kRetired) {
        if (rng.bernoulli(0.5)) {
            s.employment = kRetired;
        }
    } else if (s.employment != kRetired && rng.bernoulli(young ? 0.15 : 0.06)) {
        s.employment = draw_employment(rng, s.age);
    }
    if (s.employment != before) {
        s.income_source = income_source_for(s.employment, rng);
        if (s.employment == kUnemployed) {
            s.income -= 15;
        }
    }

    if (s.employment != kRetired && rng.bernoulli(young ? 0.12 : 0.04)) {
        s.occupation = pools.occupations[rng.below(pools.occupations.size())];
    }
    if (s.employment != kRetired && rng.bernoulli(young ? 0.09 : 0.03)) {
        s.industry = pools.industries[rng.below(pools.industries.size())];
    }

    const double drift = s.age < 30 ? 2.0 : s.age > 60 ? -1.0 : 0.0;
    const double sd = s.age < 30 ? 6.0 : 3.0;
    s.income = std::clamp(static_cast<int>(std::lround(s.income + drift + sd * rng.normal())), 0, 100);

    if (rng.bernoulli(0.2)) {
        s.support = rng.bernoulli(support_probability(s.employment));
    }
}

PersonPlan plan_person(const SynthConfig& cfg, const Pools& pools, std::size_t index) {
    PersonPlan plan;
    Rng attr(derive_seed(cfg.seed, index, kAttributes));
    plan.sex = attr.bernoulli(0.5) ? 2 : 1;
    int age = 0;
    if (attr.bernoulli(0.85)) {
        plan.first_obs = cfg.first_year;
        age = attr.between(16, 79);
    } else {
        plan.first_obs = attr.between(cfg.first_year + 1, cfg.split_year + 1);
        age = attr.between(16, 30);
    }
    plan.first_obs = std::min(plan.first_obs, cfg.last_year);
    plan.last_obs = cfg.last_year;
    if (attr.bernoulli(0.1)) {
        plan.last_obs = attr.between(std::max(plan.first_obs, cfg.split_year - 2), cfg.last_year);
    }
    const int span = plan.last_obs - plan.first_obs + 1;
    plan.observed.assign(static_cast<std::size_t>(span), 1);
    for (int k = 1; k + 1 < span; ++k) {
        if (attr.bernoulli(0.03)) {
            plan.observed[static_cast<std::size_t>(k)] = 0;
        }
    }
    const double sigma = cfg.mobility_heterogeneity;
    plan.propensity = std::exp(sigma * attr.normal() - 0.5 * sigma * sigma);
    plan.occupation_pick = attr.next_u64();
    plan.industry_pick = attr.next_u64();

    Rng life(derive_seed(cfg.seed, index, kLife));
    plan.life.reserve(static_cast<std::size_t>(span));
    plan.life.push_back(initial_state(life, age, pools));
    for (int k = 1; k < span; ++k) {
        LifeState next = plan.life.back();
        advance_state(next, life, pools);
        plan.life.push_back(next);
    }

    Rng moves(derive_seed(cfg.seed, index, kMoves));
    plan.move_draw.resize(static_cast<std::size_t>(cfg.last_year - cfg.first_year + 1));
    for (auto& u : plan.move_draw) {
        u = moves.uniform();
    }
    return plan;
}

double hazard_multiplier(const SynthConfig& cfg, const PersonPlan& plan, const LifeState& s) {
    double m = plan.propensity;
    if (s.age < 40) {
        m *= std::pow(cfg.age_effect, (40 - s.age) / 10.0);
    }
    if (s.child == codes::kChildYes) {
        m *= cfg.children_effect;
    }
    return m;
}

bool moves_in(const SynthConfig& cfg, const PersonPlan& plan, int year, double base) {
    const LifeState& prev = plan.life[static_cast<std::size_t>(year - 1 - plan.first_obs)];
    const double h = std::min(1.0, base * hazard_multiplier(cfg, plan, prev));
    return plan.move_draw[static_cast<std::size_t>(year - cfg.first_year)] < h;
}

// Smallest base hazard at which this person moves inside the label window.
double move_threshold(const SynthConfig& cfg, const PersonPlan& plan) {
    double best = std::numeric_limits<double>::infinity();
    const int end = std::min(cfg.split_year + 4, plan.last_obs);
    for (int t = std::max(cfg.split_year + 1, plan.first_obs + 1); t <= end; ++t) {
        const LifeState& prev = plan.life[static_cast<std::size_t>(t - 1 - plan.first_obs)];
        const double m = hazard_multiplier(cfg, plan, prev);
        if (m > 0) {
            best = std::min(best, plan.move_draw[static_cast<std::size_t>(t - cfg.first_year)] / m);
        }
    }
    return best;
}

PersonHistory emit_person(const SynthConfig& cfg, const Codebook& book, const Pools& pools, const PersonPlan& plan,
                          std::size_t index, double base) {
    char id[32];
    std::snprintf(id, sizeof id, "P%07zu", index + 1);
    PersonHistory h{id, {}};

    const auto n_mun = pools.municipalities.size();
    Rng res_rng(derive_seed(cfg.seed, index, kResidence));
    Rng work_rng(derive_seed(cfg.seed, index, kWork));
    std::size_t res = res_rng.below(n_mun);
    std::size_t work = work_rng.bernoulli(0.6) ? res : work_rng.below(n_mun);

    for (int year = plan.first_obs; year <= plan.last_obs; ++year) {
        const auto k = static_cast<std::size_t>(year - plan.first_obs);
        bool moved = false;
        if (year > plan.first_obs && moves_in(cfg, plan, year, base)) {
            std::size_t next = res_rng.below(n_mun - 1);
            if (next >= res) {
                ++next;
            }
            res = next;
            moved = true;
        }
        if (year > plan.first_obs) {
            const bool change = moved ? work_rng.bernoulli(0.5) : work_rng.bernoulli(0.04);
            if (change) {
                work = work_rng.bernoulli(0.6) ? res : work_rng.below(n_mun);
            }
        }
        if (!plan.observed[k]) {
            continue;
        }
        const LifeState& s = plan.life[k];
        const auto y = static_cast<std::size_t>(year - cfg.first_year);
        AnnualRecord r;
        r.year = year;
        r.sex = plan.sex;
        r.age = s.age;
        r.residence = pools.municipalities[res];
        r.family_relation = s.family;
        r.child_status = s.child;
        r.education_level = s.edu_level;
        r.education_field = s.edu_field;
        r.employment = s.employment;
        r.occupation_scheme = pools.occupation_schemes[y];
        r.occupation = recode(book, pools.occupation_scheme, r.occupation_scheme, s.occupation, plan.occupation_pick);
        r.industry_scheme = pools.industry_schemes[y];
        r.industry = recode(book, pools.industry_scheme, r.industry_scheme, s.industry, plan.industry_pick);
        r.workplace = pools.municipalities[work];
        r.labor_market_region = pools.regions[work % pools.regions.size()];
        r.income_percentile = s.income;
        r.income_source = s.income_source;
        r.government_support = s.support;
        h.records.push_back(std::move(r));
    }
    return h;
}

bool moved_in_window(const PersonHistory& h, int split_year) {
    for (std::size_t i = 1; i < h.records.size(); ++i) {
        const int y = h.records[i].year;
        if (y > split_year && y <= split_year + 4 && h.records[i].residence != h.records[i - 1].residence) {
            return true;
        }
    }
    return false;
}

} // namespace

void SynthConfig::validate() const {
    if (population_size < 1) {
        throw ConfigError("population_size", "must be at least 1");
    }
    if (!(first_year < split_year)) {
        throw ConfigError("split_year", "must be after first_year");
    }
    if (!(split_year < last_year)) {
        throw ConfigError("last_year", "must be after split_year");
    }
    if (n_municipalities < 2) {
        throw ConfigError("n_municipalities", "need at least two municipalities");
    }
    if (!(base_move_hazard >= 0.0 && base_move_hazard <= 1.0)) {
        throw ConfigError("base_move_hazard", "must be a probability in [0, 1]");
    }
    if (target_mover_share && !(*target_mover_share >= 0.0 && *target_mover_share <= 1.0)) {
        throw ConfigError("target_mover_share", "must be a fraction in [0, 1]");
    }
    if (!(age_effect > 0.0) || !std::isfinite(age_effect)) {
        throw ConfigError("age_effect", "must be a positive multiplier");
    }
    if (!(children_effect >= 0.0) || !std::isfinite(children_effect)) {
        throw ConfigError("children_effect", "must be a non-negative multiplier");
    }
    if (!(mobility_heterogeneity >= 0.0) || !std::isfinite(mobility_heterogeneity)) {
        throw ConfigError("mobility_heterogeneity", "must be non-negative");
    }
}

Population generate_population(const SynthConfig& cfg, const Codebook& book) {
    cfg.validate();
    const Pools pools = make_pools(cfg, book);

    std::vector<PersonPlan> plans(cfg.population_size);
    parallel_for(plans.size(), [&](std::size_t i) { plans[i] = plan_person(cfg, pools, i); });

    Population pop;
    double base = cfg.base_move_hazard;

    std::vector<double> thresholds;
    for (const auto& plan : plans) {
        // Gaps never touch the first or last observed year, so the cohort test
        // only needs the presence window.
        if (plan.first_obs < cfg.split_year - 3 && plan.last_obs >= cfg.split_year + 2) {
            thresholds.push_back(move_threshold(cfg, plan));
        }
    }
    if (cfg.target_mover_share && !thresholds.empty()) {
        const double target = *cfg.target_mover_share;
        auto share_at = [&](double b) {
            std::size_t n = 0;
            for (double t : thresholds) {
                n += t < b ? 1 : 0;
            }
            return static_cast<double>(n) / static_cast<double>(thresholds.size());
        };
        double hi = 1.0;
        while (share_at(hi) < target && hi < 1e6) {
            hi *= 2;
        }
        if (share_at(hi) < target) {
            throw ConfigError("target_mover_share", "unattainable with the configured hazard modifiers");
        }
        double lo = 0.0;
        for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            (share_at(mid) < target ? lo : hi) = mid;
        }
        // Pick whichever bracket end lands closer to the target.
        base = std::abs(share_at(lo) - target) <= std::abs(share_at(hi) - target) ? lo : hi;
    }
    pop.report.move_hazard = base;

    pop.persons.resize(plans.size());
    parallel_for(plans.size(), [&](std::size_t i) { pop.persons[i] = emit_person(cfg, book, pools, plans[i], i, base); });

    std::size_t movers = 0;
    for (const auto& h : pop.persons) {
        if (in_cohort(h, cfg.split_year)) {
            ++pop.report.cohort_size;
            movers += moved_in_window(h, cfg.split_year) ? 1 : 0;
        }
    }
    pop.report.mover_share =
        pop.report.cohort_size == 0 ? 0.0 : static_cast<double>(movers) / static_cast<double>(pop.report.cohort_size);
    return pop;
}

} // namespace lifetraj
