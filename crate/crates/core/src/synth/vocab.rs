//! Word lists for synthetic populations.

pub const FEMALE_NAMES: [&str; 40] = [
    "Anna", "Katharina", "Sabine", "Petra", "Claudia", "Susanne", "Monika", "Ursula", "Birgit", "Kerstin",
    "Martina", "Nicole", "Sandra", "Daniela", "Melanie", "Heike", "Karin", "Renate", "Barbara", "Johanna",
    "Charlotte", "Emma", "Marie", "Clara", "Paula", "Lisa", "Franziska", "Miriam", "Eva", "Ines", "Silke",
    "Ulrike", "Cornelia", "Regina", "Helga", "Jutta", "Sophie", "Laura", "Julia", "Lena",
];

pub const MALE_NAMES: [&str; 40] = [
    "Thomas", "Michael", "Stefan", "Christian", "Markus", "Martin", "Frank", "Peter", "Klaus", "Wolfgang",
    "Uwe", "Matthias", "Tobias", "Sebastian", "Florian", "Philipp", "Lukas", "Jonas", "Felix", "Johannes",
    "Benjamin", "Moritz", "Fabian", "Dominik", "Christoph", "Dirk", "Ralf", "Bernd", "Holger", "Sven",
    "Torsten", "Heiko", "Volker", "Rainer", "Dieter", "Manfred", "Helmut", "Werner", "Georg", "Ludwig",
];

pub const SURNAMES: [&str; 60] = [
    "Schmidt", "Schneider", "Fischer", "Weber", "Meyer", "Wagner", "Becker", "Schulz", "Hoffmann", "Koch",
    "Richter", "Bauer", "Klein", "Wolf", "Schroeder", "Neumann", "Schwarz", "Zimmermann", "Braun", "Krueger",
    "Hofmann", "Hartmann", "Lange", "Schmitt", "Werner", "Krause", "Meier", "Lehmann", "Schmid", "Schulze",
    "Maier", "Koehler", "Herrmann", "Koenig", "Walter", "Mayer", "Huber", "Kaiser", "Fuchs", "Peters",
    "Lang", "Scholz", "Moeller", "Weiss", "Jung", "Hahn", "Vogel", "Friedrich", "Keller", "Guenther",
    "Frank", "Berger", "Winkler", "Roth", "Beck", "Lorenz", "Baumann", "Franke", "Albrecht", "Ludwig",
];

/// Name parts for merged-in foreign identities; no overlap with the lists above.
pub const GHOST_FIRST_NAMES: [&str; 12] = [
    "Oluwaseun", "Xiomara", "Zbigniew", "Thandiwe", "Kwabena", "Yevgenia", "Quetzalli", "Ngozi", "Tupac",
    "Aigerim", "Bolormaa", "Chidubem",
];

pub const GHOST_SURNAMES: [&str; 12] = [
    "Okonkwo", "Vlasenko", "Tshabalala", "Nakagawa", "Quispe", "Abdulkadirov", "Ulziibayar", "Eze",
    "Huaman", "Nurlanovna", "Batbayar", "Adeyemi",
];

pub const FUNDERS: [&str; 8] = [
    "DFG", "ERC", "BMBF", "NSF", "Volkswagen Foundation", "Humboldt Foundation", "Max Planck Society",
    "Helmholtz Association",
];

pub const GHOST_FUNDERS: [&str; 4] = ["Ogun Trust", "Altai Endowment", "Andes Fund", "Sahel Council"];

/// Destinations with relative weights.
pub const HOSTS: [(&str, f64); 10] = [
    ("US", 0.30),
    ("GB", 0.15),
    ("CH", 0.12),
    ("FR", 0.10),
    ("NL", 0.08),
    ("AT", 0.08),
    ("CA", 0.05),
    ("SE", 0.04),
    ("IT", 0.04),
    ("JP", 0.04),
];

pub const CITY_HEADS: [&str; 10] = ["Ber", "Mar", "Lin", "Tor", "Sal", "Vel", "Kor", "Dun", "Fal", "Hel"];
pub const CITY_TAILS: [&str; 8] = ["ton", "burg", "ville", "stad", "mont", "field", "haven", "dorf"];

/// Tokens shared by affiliations of every country.
pub const NOISE_TOKENS: [&str; 12] = [
    "University", "Institute", "Department", "Center", "Research", "Laboratory", "Faculty", "School",
    "Science", "Technology", "Campus", "Division",
];

pub const STREETS: [&str; 5] = ["Main Street", "Station Road", "Park Avenue", "Hill Lane", "Lake Drive"];

/// Shared title words; none collide with a topic vocabulary after stemming.
pub const GENERIC_WORDS: [&str; 8] = ["study", "analysis", "novel", "approach", "effect", "evidence", "toward", "role"];

/// Planted topic vocabularies, disjoint after stemming.
pub const TOPIC_WORDS: [[&str; 24]; 6] = [
    [
        "quantum", "photon", "laser", "spectroscopy", "electron", "magnetic", "plasma", "neutron", "optics",
        "superconductor", "lattice", "boson", "fermion", "scattering", "semiconductor", "waveguide", "resonance",
        "spin", "crystal", "entanglement", "interferometer", "holography", "ferromagnet", "thermodynamics",
    ],
    [
        "patient", "clinical", "therapy", "surgery", "cancer", "tumor", "cardiac", "diagnosis", "mortality",
        "trial", "infection", "vaccine", "chronic", "hospital", "pediatric", "lesion", "biopsy", "dose",
        "symptom", "syndrome", "prognosis", "transplant", "anesthesia", "stroke",
    ],
    [
        "algorithm", "software", "network", "compiler", "database", "encryption", "protocol", "cloud",
        "parallel", "kernel", "cache", "robot", "learning", "graph", "search", "scheduling", "blockchain",
        "interface", "programming", "server", "runtime", "verification", "malware", "bandwidth",
    ],
    [
        "forest", "species", "biodiversity", "habitat", "soil", "climate", "pollinator", "wetland", "predator",
        "migration", "population", "conservation", "rainfall", "drought", "savanna", "coral", "fungi",
        "grassland", "invasive", "watershed", "nitrogen", "carbon", "seedling", "canopy",
    ],
    [
        "market", "inflation", "labor", "wage", "policy", "trade", "tax", "consumer", "monetary", "fiscal",
        "welfare", "poverty", "household", "investment", "auction", "pension", "finance", "employment",
        "equity", "tariff", "bargaining", "income", "credit", "regulation",
    ],
    [
        "synthesis", "catalyst", "polymer", "molecule", "reaction", "solvent", "oxidation", "ligand",
        "compound", "organic", "isomer", "electrolyte", "chirality", "hydrogenation", "peptide", "ester",
        "titration", "chromatography", "alkene", "acid", "aromatic", "nanoparticle", "salt", "reagent",
    ],
];

/// Journal title stems per planted topic.
pub const TOPIC_VENUES: [[&str; 2]; 6] = [
    ["Quantum Optics", "Plasma Spectroscopy"],
    ["Clinical Surgery", "Cancer Therapy"],
    ["Software Algorithm", "Network Protocol"],
    ["Forest Biodiversity", "Climate Conservation"],
    ["Labor Market", "Fiscal Policy"],
    ["Organic Synthesis", "Catalyst Reaction"],
];

/// Canonical discipline for each planted topic.
pub const TOPIC_DISCIPLINES: [&str; 6] = [
    "Physics and Astronomy",
    "Medicine",
    "Computer Science",
    "Agricultural, Biological and Environmental Sciences",
    "Economics and Social Science",
    "Chemistry and Chemical Engineering",
];
