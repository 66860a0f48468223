#!/usr/bin/env python3
"""Regenerates the bundled data and test fixtures.

Writes, relative to crates/core/:
  data/sdg13_vocabulary.json      SDG 13 terms and rules
  data/erc_seed_lexicons.json     seed terms for the 25 ERC panels
  tests/fixtures/pages/<source>/  page payloads for the four sources
  tests/fixtures/tsne_clusters.json
  tests/fixtures/manifest.json    counts computed by a naive tagger below

The corpus is synthetic. Output is deterministic for a fixed seed.
"""

import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent / "crates" / "core"
DATA = ROOT / "data"
FIX = ROOT / "tests" / "fixtures"
SEED = 13

# ---------------------------------------------------------------- vocabulary

TERMS = {
    "adaptation": ["adaptation"],
    "agriculture": ["agriculture", "farming"],
    "bioenergy": ["biofuel", "biofuels", "biogas"],
    "business_climate": ["business climate", "investment climate", "political climate", "social climate"],
    "carbon_capture": ["carbon capture", "carbon storage", "CCS"],
    "carbon_dioxide": ["carbon dioxide", "CO2"],
    "carbon_footprint": ["carbon footprint"],
    "carbon_sink": ["carbon sink", "carbon sequestration", "soil carbon"],
    "carbon_tax": ["carbon tax", "carbon pricing", "emissions trading"],
    "climate": ["climate", "climatic"],
    "climate_adaptation": ["climate adaptation", "adaptation to climate change"],
    "climate_change": ["climate change", "climatic change", "changing climate"],
    "climate_education": ["climate education", "climate literacy", "climate awareness"],
    "climate_finance": ["climate finance", "green bonds"],
    "climate_mitigation": ["climate mitigation", "climate change mitigation"],
    "climate_model": ["climate model", "climate models", "climate simulation", "Earth system model"],
    "climate_policy": ["climate policy", "climate policies", "climate action"],
    "climate_resilience": ["climate resilience", "climate resilient", "climate-proof"],
    "climate_risk": ["climate risk", "climate risks", "climate impact", "climate impacts"],
    "coastal": ["coastal", "coastline"],
    "decarbonisation": ["decarbonisation", "decarbonization", "decarbonise", "decarbonize"],
    "deforestation": ["deforestation", "afforestation", "reforestation"],
    "district_heating": ["district heating", "heat pump", "heat pumps"],
    "drought": ["drought", "droughts"],
    "ecosystem": ["ecosystem", "ecosystems"],
    "electric_vehicle": ["electric vehicle", "electric vehicles", "electromobility"],
    "emission_reduction": ["emission reduction", "emissions reduction", "reducing emissions"],
    "emissions": ["emission", "emissions"],
    "energy": ["energy"],
    "energy_efficiency": ["energy efficiency", "energy efficient", "energy savings"],
    "energy_transition": ["energy transition", "green transition"],
    "extreme_weather": ["extreme weather", "extreme events"],
    "flood_risk": ["flood risk", "flooding", "floods"],
    "fossil_fuel": ["fossil fuel", "fossil fuels", "coal", "natural gas"],
    "glacier": ["glacier", "glaciers", "ice sheet", "ice sheets"],
    "global_warming": ["global warming"],
    "greenhouse_gas": ["greenhouse gas", "greenhouse gases", "GHG"],
    "heatwave": ["heatwave", "heat wave", "heatwaves"],
    "ipcc": ["IPCC", "Intergovernmental Panel on Climate Change"],
    "kyoto_protocol": ["Kyoto Protocol"],
    "low_carbon": ["low carbon", "low-carbon"],
    "methane": ["methane"],
    "mitigation": ["mitigation"],
    "net_zero": ["net zero", "net-zero", "carbon neutral", "carbon neutrality", "climate neutral"],
    "ocean_acidification": ["ocean acidification"],
    "paleoclimate": ["paleoclimate", "palaeoclimate"],
    "paris_agreement": ["Paris Agreement"],
    "permafrost": ["permafrost"],
    "renewable_energy": ["renewable energy", "renewables"],
    "sea_ice": ["sea ice", "Arctic sea ice"],
    "sea_level_rise": ["sea level rise", "sea-level rise", "rising sea levels"],
    "solar_energy": ["solar energy", "solar power", "photovoltaic", "photovoltaics"],
    "temperature_rise": ["temperature rise", "warming", "rising temperatures"],
    "transport": ["transport", "mobility"],
    "unfccc": ["UNFCCC"],
    "weather": ["weather"],
    "wind_power": ["wind power", "wind energy", "offshore wind"],
}


def rule(rid, all_of=(), any_of=(), none_of=()):
    r = {"rule_id": rid, "all_of": sorted(all_of), "any_of": sorted(any_of)}
    if none_of:
        r["none_of"] = sorted(none_of)
    return r


RULES = [
    rule("R01", ["climate_change"]),
    rule("R02", ["global_warming"]),
    rule("R03", ["greenhouse_gas"], ["emissions", "emission_reduction", "mitigation"]),
    rule("R04", any_of=["paris_agreement", "unfccc", "kyoto_protocol", "ipcc"]),
    rule("R05", ["climate_adaptation"]),
    rule("R06", ["climate_mitigation"]),
    rule("R07", ["sea_level_rise"], ["coastal", "flood_risk", "climate"]),
    rule("R08", ["extreme_weather"], ["climate", "heatwave", "drought", "flood_risk"]),
    rule("R09", ["renewable_energy"], ["decarbonisation", "low_carbon", "emission_reduction", "net_zero", "energy_transition"]),
    rule("R10", ["decarbonisation"]),
    rule("R11", ["net_zero"]),
    rule("R12", ["carbon_capture"], ["carbon_dioxide", "emissions", "net_zero"]),
    rule("R13", ["carbon_tax"]),
    rule("R14", ["climate_model"]),
    rule("R15", ["climate_risk"], none_of=["business_climate"]),
    rule("R16", ["climate_resilience"]),
    rule("R17", ["climate_policy"]),
    rule("R18", ["permafrost"], ["methane", "carbon_dioxide", "temperature_rise"]),
    rule("R19", ["glacier"], ["temperature_rise", "sea_level_rise", "climate"]),
    rule("R20", ["ocean_acidification"]),
    rule("R21", ["carbon_footprint"], ["emissions", "low_carbon", "energy_efficiency"]),
    rule("R22", ["climate"], ["adaptation", "mitigation"], ["business_climate"]),
    rule("R23", ["energy_efficiency"], ["emission_reduction", "carbon_dioxide", "greenhouse_gas"]),
    rule("R24", ["carbon_sink"], ["deforestation", "carbon_dioxide", "climate"]),
    rule("R25", ["climate_finance"]),
    rule("R26", ["climate_education"]),
    rule("R27", ["fossil_fuel"], ["emission_reduction", "energy_transition", "decarbonisation"]),
    rule("R28", ["paleoclimate"], ["temperature_rise", "climate_model"]),
    rule("R29", ["electric_vehicle"], ["emissions", "low_carbon"]),
    rule("R30", ["district_heating"], ["renewable_energy", "decarbonisation", "low_carbon"]),
]

# ------------------------------------------------------------- seed lexicons

PANELS = {
    "PE1": ["algebraic geometry", "number theory", "stochastic process", "differential equation", "topology", "combinatorics"],
    "PE2": ["particle physics", "quantum field", "neutrino", "nuclear physics", "plasma physics", "hadron"],
    "PE3": ["superconductivity", "condensed matter", "spintronics", "semiconductor", "phase transition", "magnetism"],
    "PE4": ["spectroscopy", "physical chemistry", "catalysis", "electrochemistry", "reaction kinetics", "analytical chemistry"],
    "PE5": ["polymer", "synthetic chemistry", "nanomaterial", "metal organic framework", "composite material", "organic synthesis"],
    "PE6": ["machine learning", "algorithm", "software", "neural network", "distributed computing", "data mining"],
    "PE7": ["control system", "power electronics", "wireless communication", "signal processing", "smart grid", "robotics"],
    "PE8": ["wind turbine", "combustion", "fluid dynamics", "manufacturing process", "structural engineering", "heat transfer"],
    "PE9": ["astrophysics", "galaxy", "cosmology", "exoplanet", "solar wind", "telescope"],
    "PE10": ["glaciology", "oceanography", "atmospheric science", "ice core", "hydrology", "geophysics"],
    "LS1": ["protein structure", "biochemistry", "enzyme", "molecular biology", "structural biology", "RNA"],
    "LS2": ["genomics", "gene expression", "systems biology", "transcriptome", "genome sequencing", "bioinformatics"],
    "LS3": ["cell biology", "stem cell", "developmental biology", "cell division", "embryo", "organoid"],
    "LS4": ["metabolism", "obesity", "diabetes", "endocrinology", "physiology", "cardiovascular"],
    "LS5": ["neuroscience", "brain", "neuron", "cognition", "synapse", "neurodegeneration"],
    "LS6": ["immune system", "infection", "vaccine", "pathogen", "antibody", "inflammation"],
    "LS7": ["clinical trial", "diagnosis", "therapy", "public health", "epidemiology", "patient"],
    "LS8": ["biodiversity", "species distribution", "evolutionary biology", "ecology", "habitat", "population dynamics"],
    "LS9": ["crop yield", "biotechnology", "livestock", "food production", "plant breeding", "aquaculture"],
    "SH1": ["economics", "labour market", "financial market", "economic growth", "firm productivity", "monetary policy"],
    "SH2": ["governance", "political science", "public policy", "legal framework", "democracy", "regulation"],
    "SH3": ["sociology", "social inequality", "migration", "urban studies", "demography", "education system"],
    "SH4": ["psychology", "behaviour", "linguistics", "decision making", "wellbeing", "perception"],
    "SH5": ["cultural heritage", "literature", "philosophy", "art history", "museum", "media studies"],
    "SH6": ["archaeology", "history", "prehistoric", "medieval", "ancient", "historical records"],
}

# Plain topical words per panel (not seed terms) to give the topic model
# something to work with.
PANEL_WORDS = {
    "PE1": "proof theorem manifold lattice graphs bounds",
    "PE2": "detector collider quarks beam scattering isotopes",
    "PE3": "crystal electrons lattice thin films spin conductivity",
    "PE4": "molecules surface reaction laser ions solvent",
    "PE5": "synthesis membranes crystals coatings fibres solvents",
    "PE6": "data models prediction optimisation sensors inference",
    "PE7": "grid converters networks sensors actuators communication",
    "PE8": "turbines blades flows engines materials prototypes",
    "PE9": "stars planets radiation spectra orbit satellites",
    "PE10": "ocean atmosphere sediments rivers currents fjords",
    "LS1": "proteins binding folding membranes ligands peptides",
    "LS2": "genes variants sequencing cohorts expression markers",
    "LS3": "tissue differentiation cells signalling growth organs",
    "LS4": "heart insulin liver muscle hormones fat",
    "LS5": "memory circuits cortex behaviour neurons learning",
    "LS6": "viruses bacteria immunity cells vaccines hosts",
    "LS7": "hospital treatment cohort outcomes care screening",
    "LS8": "species forests wetlands birds insects pollinators",
    "LS9": "soil crops cattle fish feed yields",
    "SH1": "prices firms wages trade households investment",
    "SH2": "institutions law courts parliament policies states",
    "SH3": "cities families schools neighbourhoods class welfare",
    "SH4": "experiments attitudes children language emotions choice",
    "SH5": "texts films music archives art collections",
    "SH6": "excavation settlements burials artefacts chronology vikings",
}

# Each list holds sentences that satisfy at least one vocabulary rule.
CLIMATE_SENTENCES = [
    "We assess how climate change alters {w1} and {w2} across Denmark.",
    "The results inform climate adaptation planning under sea level rise along the coastal zone.",
    "Emission pathways follow the Paris Agreement and recent IPCC assessments.",
    "We quantify carbon dioxide fluxes and their role in global warming.",
    "The consortium develops renewable energy systems for the decarbonisation of district heating.",
    "Extreme weather such as heatwaves and drought is analysed for {w1}.",
    "Climate mitigation instruments including a carbon tax are compared.",
    "Permafrost thaw releases methane and amplifies warming.",
    "Ocean acidification threatens {w1} in Danish waters.",
    "A regional climate model ensemble projects rising temperatures and flood risk.",
    "The project strengthens climate resilience of municipalities facing floods.",
    "Low-carbon transport reduces the carbon footprint of {w2}.",
    "Net zero targets require carbon capture of CO2 from industrial emissions.",
    "Energy efficiency in buildings yields emission reduction and lower greenhouse gas output.",
    "Glaciers and the Greenland ice sheet respond to warming with sea-level rise.",
    "Climate policy and climate finance shape the green transition.",
    "Greenhouse gases from {w1} are reduced through mitigation measures.",
    "Paleoclimate records constrain the temperature rise simulated by climate models.",
    "Electric vehicles cut emissions in urban mobility.",
    "Carbon sequestration in forests offsets deforestation and CO2 release.",
    "Fossil fuel phase-out accelerates the energy transition.",
    "Climate education and climate awareness programmes reach schools in {w2}.",
    "Adaptation to climate change is planned with local stakeholders.",
    "Heat pumps powered by offshore wind support a low carbon heat supply.",
]

# Uppercase and non-ASCII variants that exercise case folding.
LOUD_SENTENCES = [
    "GLOBAL WARMING AND SEA-LEVEL RISE THREATEN COASTAL ÆRØ.",
    "Klimaændringer og CLIMATE CHANGE i Ærøskøbing og Sønderborg.",
    "The Paris AGREEMENT (UNFCCC) frames Danish CLIMATE POLICY.",
]

# Sentences that look climate-related but satisfy no rule.
DECOY_SENTENCES = [
    "Seedlings acclimated to greenhouse conditions were sampled weekly.",
    "The business climate for start-ups improved, although climate risk disclosure was rare.",
    "Microclimate sensors logged the weather inside the laboratory.",
    "Energy efficiency of data centres was benchmarked.",
    "Plants acclimate quickly to cold, and the political climate favoured adaptation funding.",
    "Solar energy panels were mounted on the museum roof.",
    "Coal mining shaped regional history.",
]

GENERIC = [
    "The study combines fieldwork with modelling of {w1}.",
    "Data were collected between 2014 and 2019.",
    "We compare {w1} with {w2} using open data.",
    "Partners from universities and industry contribute expertise.",
    "Findings are shared through open-access publications.",
    "A new framework for {w2} is proposed and validated.",
    "The approach scales to national datasets.",
]

PANEL_SENTENCES = [
    "{T1} for {w1}.",
    "{T1} and {t2} for {w1} and {w2}.",
    "{T1} with {t2} in {w2}.",
]


def cap(s):
    return s[:1].upper() + s[1:]


def make_text(rng, panel, climate, seed_count, noise_panel=None, decoy=False, loud=False):
    terms = rng.sample(PANELS[panel], k=min(seed_count, len(PANELS[panel])))
    words = PANEL_WORDS[panel].split()
    sentences = []

    def fill(tpl, ts):
        w1, w2 = rng.sample(words, 2)
        pad = ts + [rng.choice(words)] * 3
        return tpl.format(t1=pad[0], t2=pad[1], t3=pad[2], T1=cap(pad[0]), w1=w1, w2=w2)

    if seed_count == 0:
        sentences.append(fill(rng.choice(GENERIC), []))
    elif seed_count == 1:
        sentences.append(fill("{T1} for {w1}.", terms))
    else:
        for i in range(0, len(terms), 2):
            chunk = terms[i:i + 2]
            tpl = rng.choice(PANEL_SENTENCES[1:]) if len(chunk) == 2 else PANEL_SENTENCES[0]
            sentences.append(fill(tpl, chunk))
    if noise_panel:
        other = rng.choice(PANELS[noise_panel])
        sentences.append(f"Some tools are borrowed from {other}.")
    for _ in range(rng.randint(1, 2)):
        a, b, c = rng.sample(words, 3)
        sentences.append(f"{cap(a)}, {b} and {c}.")
    if rng.random() < 0.3:
        sentences.append(fill(rng.choice(GENERIC), []))
    if climate:
        for tpl in rng.sample(CLIMATE_SENTENCES, rng.randint(1, 3)):
            sentences.append(fill(tpl, []))
    if decoy:
        sentences.append(rng.choice(DECOY_SENTENCES))
    if loud:
        sentences.append(rng.choice(LOUD_SENTENCES))
    rng.shuffle(sentences)
    extra = " ".join(rng.sample(words, 3))
    title_bits = [cap(terms[0]) if terms else cap(words[0]), "and", extra]
    if climate and rng.random() < 0.4:
        title_bits += ["under", rng.choice(["climate change", "global warming", "a changing climate", "net zero targets"])]
    return " ".join(title_bits), " ".join(sentences)


SOURCES = {
    # name: (kept, extras, page sizes of raw items, climate probability)
    "openalex": (57, 3, [25, 25, 10], 0.30),
    "openaire": (70, 2, [25, 25, 22], 0.30),
    "cordis": (45, 2, [20, 20, 7], 0.55),
    "kohesio": (28, 1, [10, 10, 9], 0.40),
}

PANEL_WEIGHTS = {p: (3 if p in ("PE10", "PE8", "LS8", "SH2", "LS9", "PE7") else 1) for p in PANELS}


def gen_records(rng, source, kept, extras, climate_p):
    """(record plan, keep) pairs; extras fail the country or year filter."""
    recs = []
    panels = list(PANELS)
    weights = [PANEL_WEIGHTS[p] for p in panels]
    for i in range(kept + extras):
        panel = rng.choices(panels, weights)[0]
        climate = rng.random() < climate_p
        r = rng.random()
        seed_count = 0 if r < 0.08 else 1 if r < 0.16 else rng.randint(2, 4)
        noise = rng.choice(panels) if rng.random() < 0.2 else None
        decoy = (not climate) and rng.random() < 0.3
        loud = rng.random() < 0.06
        title, body = make_text(rng, panel, climate, seed_count, noise, decoy, loud)
        year = rng.randint(2014, 2019)
        countries = ["DK"]
        if rng.random() < 0.3:
            countries.append(rng.choice(["SE", "DE", "NO", "EL", "UK", "FI"]))
        if i >= kept:
            if (i - kept) % 2 == 0:
                countries = [rng.choice(["SE", "DE", "NO"])]
            else:
                year = rng.choice([2012, 2013, 2020, 2021])
        recs.append({"title": title, "body": body, "year": year, "countries": countries, "keep": i < kept})
    # Deterministic special cases on the first kept records.
    recs[0]["title"] = "Acclimation of Arabidopsis to cold stress"
    recs[0]["body"] = ("Seedlings acclimated to greenhouse conditions were sampled weekly. "
                       "Plants acclimate quickly to cold. Gene expression and transcriptome profiles were compared.")
    recs[1]["title"] = "GLOBAL WARMING AND SEA-LEVEL RISE ON ÆRØ"
    recs[1]["body"] = "Klimaændringer og CLIMATE CHANGE i Ærøskøbing. Oceanography and hydrology of the coastline."
    return recs


def to_openalex(i, rec):
    wid = f"W{3000000000 + i}"
    tokens = rec["body"].split(" ")
    inv = {}
    for pos, tok in enumerate(tokens):
        inv.setdefault(tok, []).append(pos)
    return {
        "id": f"https://openalex.org/{wid}",
        "doi": f"https://doi.org/10.5555/sti.{i:04d}",
        "title": rec["title"],
        "publication_year": rec["year"],
        "abstract_inverted_index": inv,
        "authorships": [
            {"institutions": [{"display_name": f"Institution {c}", "country_code": c}], "countries": [c]}
            for c in rec["countries"]
        ],
    }


def to_openaire(i, rec):
    return {
        "id": f"doi_dedup___::{i:032x}",
        "mainTitle": rec["title"],
        "descriptions": [rec["body"]],
        "publicationDate": f"{rec['year']}-{(i % 12) + 1:02d}-15",
        "countries": [{"code": c, "label": c} for c in rec["countries"]],
        # Every third product shares a DOI with an OpenAlex work.
        "pids": [{"scheme": "doi", "value": f"10.5555/sti.{i:04d}" if i % 3 == 0 else f"10.7777/oa.{i:04d}"}],
    }


def to_cordis(i, rec):
    return {
        "id": str(640000 + i),
        "acronym": f"PRJ{i:03d}",
        "title": rec["title"],
        "objective": rec["body"],
        "startDate": f"{rec['year']}-{(i % 12) + 1:02d}-01",
        "grantDoi": f"10.3030/{640000 + i}",
        "organizations": [{"name": f"Beneficiary {c}", "country": c, "role": "participant"} for c in rec["countries"]],
    }


def to_kohesio(i, rec):
    return {
        "id": f"Q{2500000 + i}",
        "label": rec["title"],
        "summary": rec["body"],
        "startTime": f"{rec['year']}-{(i % 12) + 1:02d}-01",
        "countryCode": rec["countries"][0],
    }


def page_payload(source, items, cursor):
    if source == "openalex":
        return {"meta": {"count": None, "next_cursor": cursor}, "results": items}
    if source == "openaire":
        return {"header": {"numFound": None, "nextCursor": cursor}, "results": items}
    return {"next_cursor": cursor, "projects": items}


CONVERT = {"openalex": to_openalex, "openaire": to_openaire, "cordis": to_cordis, "kohesio": to_kohesio}
PREFIX = {"openalex": "openalex:W", "openaire": "openaire:", "cordis": "cordis:", "kohesio": "kohesio:"}


def record_id(source, item):
    if source == "openalex":
        return "openalex:" + item["id"].rsplit("/", 1)[-1]
    return f"{source}:{item['id']}"


def record_text(source, item):
    if source == "openalex":
        inv = item["abstract_inverted_index"]
        body = " ".join(t for _, t in sorted((p, t) for t, ps in inv.items() for p in ps))
        return item["title"] + "\n" + body
    if source == "openaire":
        return item["mainTitle"] + "\n" + "\n".join(item["descriptions"])
    if source == "cordis":
        return item["title"] + "\n" + item["objective"]
    return item["label"] + "\n" + item["summary"]


# ------------------------------------------------------------- naive oracle

def normalize(text):
    out = []
    for c in text:
        if c.isalnum():
            low = c.lower()
            out.append(low if len(low) == 1 else c)
        else:
            out.append(" ")
    return " ".join("".join(out).split())


def contains(tokens, phrase):
    n = len(phrase)
    return any(tokens[i:i + n] == phrase for i in range(len(tokens) - n + 1))


def naive_tag(text):
    tokens = normalize(text).split(" ")
    found = {tid for tid, forms in TERMS.items() if any(contains(tokens, normalize(f).split(" ")) for f in forms)}
    rules = [r["rule_id"] for r in RULES
             if all(t in found for t in r["all_of"])
             and (not r["any_of"] or any(t in found for t in r["any_of"]))
             and not any(t in found for t in r.get("none_of", []))]
    return found, rules


def naive_weak_label(text):
    tokens = normalize(text).split(" ")
    hits = {p: sum(contains(tokens, normalize(t).split(" ")) for t in set(terms)) for p, terms in PANELS.items()}
    best = max(hits.values())
    winners = [p for p, h in hits.items() if h == best]
    return winners[0] if best >= 2 and len(winners) == 1 else None


def main():
    rng = random.Random(SEED)
    DATA.mkdir(parents=True, exist_ok=True)
    (DATA / "sdg13_vocabulary.json").write_text(
        json.dumps({"sdg_id": "SDG13", "terms": TERMS, "rules": RULES}, indent=2, ensure_ascii=False) + "\n")
    (DATA / "erc_seed_lexicons.json").write_text(json.dumps(PANELS, indent=2, ensure_ascii=False) + "\n")

    manifest = {"seed": SEED, "sources": {}}
    all_kept = []
    offset = {"openalex": 1, "openaire": 1, "cordis": 1, "kohesio": 1}
    for source, (kept, extras, sizes, climate_p) in SOURCES.items():
        recs = gen_records(rng, source, kept, extras, climate_p)
        # Filtered-out extras go to the last page.
        order = [r for r in recs if r["keep"]] + [r for r in recs if not r["keep"]]
        items = [CONVERT[source](offset[source] + i, r) for i, r in enumerate(order)]
        assert sum(sizes) == len(items)
        pages_dir = FIX / "pages" / source
        pages_dir.mkdir(parents=True, exist_ok=True)
        for old in pages_dir.glob("*.json"):
            old.unlink()
        start = 0
        kept_per_page = []
        for p, size in enumerate(sizes):
            chunk = items[start:start + size]
            kept_per_page.append(sum(1 for r in order[start:start + size] if r["keep"]))
            cursor = f"{source}-cursor-{p + 1}" if p + 1 < len(sizes) else None
            (pages_dir / f"page-{p:03d}.json").write_text(
                json.dumps(page_payload(source, chunk, cursor), indent=1, ensure_ascii=False) + "\n")
            start += size
        kept_items = [it for it, r in zip(items, order) if r["keep"]]
        tagged = []
        for it in kept_items:
            rid = record_id(source, it)
            text = record_text(source, it)
            _, rules = naive_tag(text)
            if rules:
                tagged.append(rid)
            all_kept.append((rid, text))
        manifest["sources"][source] = {
            "raw": len(items),
            "kept": len(kept_items),
            "pages": len(sizes),
            "page_sizes": kept_per_page,
            "tagged": len(tagged),
        }

    all_kept.sort()
    labels = {rid: p for rid, text in all_kept if (p := naive_weak_label(text))}
    tagged_ids = sorted(rid for rid, text in all_kept if naive_tag(text)[1])
    manifest["total_kept"] = len(all_kept)
    manifest["tagged_ids"] = tagged_ids
    manifest["weak_labeled"] = len(labels)
    manifest["weak_label_counts"] = {p: sum(1 for v in labels.values() if v == p) for p in PANELS if any(v == p for v in labels.values())}
    (FIX / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

    # Three well-separated Gaussian clusters in 10-D, 10 points each.
    crng = random.Random(SEED + 1)
    points, labels3 = [], []
    for c in range(3):
        centre = [10.0 * c if d == c else 0.0 for d in range(10)]
        for _ in range(10):
            points.append([round(x + crng.gauss(0, 1), 6) for x in centre])
            labels3.append(c)
    (FIX / "tsne_clusters.json").write_text(json.dumps({"points": points, "labels": labels3}) + "\n")

    for s, m in manifest["sources"].items():
        print(s, m)
    print("total kept", manifest["total_kept"], "tagged", len(tagged_ids), "weak labeled", len(labels))


if __name__ == "__main__":
    main()
