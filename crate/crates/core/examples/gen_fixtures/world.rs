//! A seeded, synthetic central-Paris map: real landmark coordinates plus
//! generated restaurants and cafes, and a route geometry synthesizer.

use std::collections::BTreeSet;

use geoqa_core::{haversine_distance, LatLng};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const WEEKDAYS: [&str; 7] = ["Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"];

/// Opening ranges per weekday (Monday first), minutes after midnight.
pub type Hours = [Vec<(u16, u16)>; 7];

#[derive(Debug, Clone)]
pub struct Poi {
    pub name: String,
    pub aliases: Vec<String>,
    /// Google place type code (`restaurant`, `cafe`, `museum`, ...).
    pub category: &'static str,
    pub lat: f64,
    pub lon: f64,
    pub street: String,
    pub postcode: String,
    pub google_id: String,
    pub tomtom_id: String,
    pub osm_type: char,
    pub osm_id: u64,
    pub rating: Option<f64>,
    pub price: Option<u8>,
    pub hours: Hours,
    pub reviews: Vec<String>,
    pub wheelchair: [Option<bool>; 3],
}

impl Poi {
    pub fn location(&self) -> LatLng {
        LatLng::new(self.lat, self.lon).expect("world coordinates are valid")
    }

    pub fn arrondissement(&self) -> u32 {
        self.postcode[3..].parse().expect("Paris postcode")
    }

    pub fn is_landmark(&self) -> bool {
        !matches!(self.category, "restaurant" | "cafe")
    }
}

pub struct World {
    pub pois: Vec<Poi>,
}

struct Landmark {
    name: &'static str,
    aliases: &'static [&'static str],
    category: &'static str,
    lat: f64,
    lon: f64,
    street: &'static str,
    postcode: &'static str,
    rating: f64,
    hours: [Option<(u16, u16)>; 7],
    wheelchair: [Option<bool>; 3],
}

const fn h(open: u16, close: u16) -> Option<(u16, u16)> {
    Some((open, close))
}

const fn daily(open: u16, close: u16) -> [Option<(u16, u16)>; 7] {
    [h(open, close); 7]
}

const LANDMARKS: &[Landmark] = &[
    Landmark {
        name: "Louvre Museum",
        aliases: &["louvre", "musee du louvre"],
        category: "museum",
        lat: 48.8606,
        lon: 2.3376,
        street: "Rue de Rivoli",
        postcode: "75001",
        rating: 4.7,
        hours: [h(540, 1080), None, h(540, 1260), h(540, 1080), h(540, 1260), h(540, 1080), h(540, 1080)],
        wheelchair: [Some(true), Some(true), Some(true)],
    },
    Landmark {
        name: "Eiffel Tower",
        aliases: &["tour eiffel", "eiffel"],
        category: "tourist_attraction",
        lat: 48.8584,
        lon: 2.2945,
        street: "Avenue Gustave Eiffel",
        postcode: "75007",
        rating: 4.7,
        hours: daily(570, 1425),
        wheelchair: [Some(true), Some(false), Some(true)],
    },
    Landmark {
        name: "Musée d'Orsay",
        aliases: &["orsay museum", "orsay"],
        category: "museum",
        lat: 48.8600,
        lon: 2.3266,
        street: "Esplanade Valéry Giscard d'Estaing",
        postcode: "75007",
        rating: 4.8,
        hours: [None, h(570, 1080), h(570, 1080), h(570, 1305), h(570, 1080), h(570, 1080), h(570, 1080)],
        wheelchair: [Some(true), None, Some(true)],
    },
    Landmark {
        name: "Notre-Dame de Paris",
        aliases: &["notre dame", "notre-dame cathedral"],
        category: "tourist_attraction",
        lat: 48.8530,
        lon: 2.3499,
        street: "Parvis Notre-Dame",
        postcode: "75004",
        rating: 4.7,
        hours: daily(465, 1140),
        wheelchair: [Some(true), None, None],
    },
    Landmark {
        name: "Arc de Triomphe",
        aliases: &["arc de triomphe de l'etoile"],
        category: "tourist_attraction",
        lat: 48.8738,
        lon: 2.2950,
        street: "Place Charles de Gaulle",
        postcode: "75008",
        rating: 4.7,
        hours: daily(600, 1380),
        wheelchair: [Some(false), Some(false), None],
    },
    Landmark {
        name: "Sacré-Cœur Basilica",
        aliases: &["sacre coeur", "sacre-coeur"],
        category: "tourist_attraction",
        lat: 48.8867,
        lon: 2.3431,
        street: "Rue du Chevalier de la Barre",
        postcode: "75018",
        rating: 4.7,
        hours: daily(390, 1350),
        wheelchair: [Some(true), None, Some(false)],
    },
    Landmark {
        name: "Panthéon",
        aliases: &["pantheon"],
        category: "tourist_attraction",
        lat: 48.8462,
        lon: 2.3464,
        street: "Place du Panthéon",
        postcode: "75005",
        rating: 4.6,
        hours: daily(600, 1080),
        wheelchair: [Some(true), None, Some(true)],
    },
    Landmark {
        name: "Centre Pompidou",
        aliases: &["pompidou", "beaubourg"],
        category: "museum",
        lat: 48.8607,
        lon: 2.3522,
        street: "Place Georges-Pompidou",
        postcode: "75004",
        rating: 4.4,
        hours: [h(660, 1260), None, h(660, 1260), h(660, 1380), h(660, 1260), h(660, 1260), h(660, 1260)],
        wheelchair: [Some(true), Some(true), Some(true)],
    },
    Landmark {
        name: "Palais Garnier",
        aliases: &["opera garnier", "opera"],
        category: "tourist_attraction",
        lat: 48.8720,
        lon: 2.3316,
        street: "Place de l'Opéra",
        postcode: "75009",
        rating: 4.7,
        hours: daily(600, 1020),
        wheelchair: [Some(true), None, None],
    },
    Landmark {
        name: "Jardin du Luxembourg",
        aliases: &["luxembourg gardens", "luxembourg"],
        category: "park",
        lat: 48.8462,
        lon: 2.3372,
        street: "Rue de Médicis",
        postcode: "75006",
        rating: 4.7,
        hours: daily(450, 1290),
        wheelchair: [Some(true), None, Some(true)],
    },
    Landmark {
        name: "Sainte-Chapelle",
        aliases: &["sainte chapelle"],
        category: "tourist_attraction",
        lat: 48.8554,
        lon: 2.3450,
        street: "Boulevard du Palais",
        postcode: "75001",
        rating: 4.7,
        hours: daily(540, 1140),
        wheelchair: [Some(false), None, None],
    },
    Landmark {
        name: "Place de la Concorde",
        aliases: &["concorde"],
        category: "tourist_attraction",
        lat: 48.8656,
        lon: 2.3212,
        street: "Place de la Concorde",
        postcode: "75008",
        rating: 4.6,
        hours: daily(0, 1440),
        wheelchair: [Some(true), None, None],
    },
    Landmark {
        name: "Les Invalides",
        aliases: &["invalides", "hotel des invalides"],
        category: "museum",
        lat: 48.8555,
        lon: 2.3125,
        street: "Rue de Grenelle",
        postcode: "75007",
        rating: 4.7,
        hours: daily(600, 1080),
        wheelchair: [Some(true), Some(true), None],
    },
];

pub const STREETS: &[&str] = &[
    "Rue de Rivoli",
    "Rue Saint-Honoré",
    "Quai Branly",
    "Quai d'Orsay",
    "Quai Voltaire",
    "Quai des Grands Augustins",
    "Boulevard Saint-Germain",
    "Boulevard Haussmann",
    "Avenue de l'Opéra",
    "Avenue des Champs-Élysées",
    "Rue de Grenelle",
    "Rue du Bac",
    "Rue des Rosiers",
    "Rue Montorgueil",
    "Rue de Seine",
    "Rue Mouffetard",
    "Boulevard Saint-Michel",
    "Rue de la Paix",
    "Avenue Bosquet",
    "Rue Cler",
    "Rue de Rennes",
    "Rue du Faubourg Saint-Antoine",
    "Rue Lepic",
    "Rue des Martyrs",
    "Boulevard de Sébastopol",
    "Rue de Turenne",
    "Avenue Kléber",
    "Rue de l'Université",
];

const RESTAURANT_PREFIXES: &[&str] = &[
    "Le", "La", "Chez", "Bistrot", "Brasserie", "Auberge", "Le Petit", "La Table de", "Maison", "Le Comptoir de",
];
const CAFE_PREFIXES: &[&str] = &["Café", "Café de la", "Salon", "L'Atelier", "Café du", "Kawa"];
const CORES: &[&str] = &[
    "Marais", "Rivoli", "Jardin", "Lune", "Marché", "Cygne", "Coq", "Vigne", "Pont", "Quai", "Seine", "Tilleul",
    "Moulin", "Passage", "Gourmet", "Palais", "Étoile", "Théâtre", "Canal", "Louis", "Marius", "Colette", "Odette",
    "Gaston", "Lucien", "Amélie", "Hugo", "Rosalie", "Fernand", "Sully",
];
const SUFFIXES: &[&str] = &["", " Paris", " 1900", " & Fils", " Saint-Paul"];

const DISHES: &[&str] = &[
    "duck confit",
    "onion soup",
    "steak frites",
    "croque monsieur",
    "crème brûlée",
    "escargots",
    "tarte tatin",
    "coq au vin",
    "ratatouille",
    "croissants",
];
const REVIEW_PATTERNS: &[&str] = &[
    "Lovely {dish} and friendly staff.",
    "The {dish} was excellent, a little noisy at dinner.",
    "Good value for the area. Try the {dish}.",
    "Service was slow but the {dish} made up for it.",
    "Cosy room, generous {dish}, will come back.",
    "Average {dish}, nice terrace though.",
];
const LANDMARK_REVIEWS: &[&str] = &[
    "Book tickets in advance, the queue is long.",
    "Worth a full afternoon.",
    "Spectacular in the evening light.",
    "Crowded at weekends, calmer early in the morning.",
];

fn random_id(rng: &mut ChaCha8Rng, prefix: &str, len: usize) -> String {
    const ALPHABET: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789_-";
    let tail: String = (0..len)
        .map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())] as char)
        .collect();
    format!("{prefix}{tail}")
}

/// Rounds to the 1e-5 grid so precision-5 polylines round-trip exactly.
pub fn grid(v: f64) -> f64 {
    (v * 1e5).round() / 1e5
}

fn restaurant_hours(rng: &mut ChaCha8Rng) -> Hours {
    let closed: BTreeSet<usize> = (0..rng.gen_range(0..3)).map(|_| rng.gen_range(0..7)).collect();
    std::array::from_fn(|day| {
        if closed.contains(&day) {
            Vec::new()
        } else if day >= 5 {
            vec![(720, 1410)]
        } else {
            vec![(720, 870), (1140, 1350)]
        }
    })
}

fn cafe_hours(rng: &mut ChaCha8Rng) -> Hours {
    let open = [420, 450, 480][rng.gen_range(0..3)];
    let close = [1080, 1140, 1200][rng.gen_range(0..3)];
    std::array::from_fn(|day| if day == 6 && rng.gen_bool(0.3) { Vec::new() } else { vec![(open, close)] })
}

fn maybe_bool(rng: &mut ChaCha8Rng) -> Option<bool> {
    match rng.gen_range(0..5) {
        0 => None,
        1 | 2 => Some(false),
        _ => Some(true),
    }
}

impl World {
    pub fn generate(seed: u64) -> World {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pois = Vec::new();
        for (i, l) in LANDMARKS.iter().enumerate() {
            let mut reviews: Vec<String> = LANDMARK_REVIEWS.iter().map(|r| r.to_string()).collect();
            let shift = i % reviews.len();
            reviews.rotate_left(shift);
            reviews.truncate(3);
            pois.push(Poi {
                name: l.name.to_string(),
                aliases: l.aliases.iter().map(|a| a.to_string()).collect(),
                category: l.category,
                lat: l.lat,
                lon: l.lon,
                street: l.street.to_string(),
                postcode: l.postcode.to_string(),
                google_id: random_id(&mut rng, "ChIJ", 23),
                tomtom_id: random_id(&mut rng, "", 22),
                osm_type: 'W',
                osm_id: rng.gen_range(10_000_000..900_000_000),
                rating: Some(l.rating),
                price: None,
                hours: std::array::from_fn(|d| l.hours[d].into_iter().collect()),
                reviews,
                wheelchair: l.wheelchair,
            });
        }

        let mut names: BTreeSet<String> = pois.iter().map(|p| p.name.clone()).collect();
        let mut spots: Vec<(f64, f64, &'static str)> = Vec::new();
        for l in LANDMARKS {
            for k in 0..28 {
                let category = if k < 20 { "restaurant" } else { "cafe" };
                let r = 60.0 + rng.gen::<f64>().sqrt() * 900.0;
                let theta = rng.gen::<f64>() * std::f64::consts::TAU;
                let dlat = r * theta.cos() / 111_320.0;
                let dlon = r * theta.sin() / (111_320.0 * l.lat.to_radians().cos());
                spots.push((l.lat + dlat, l.lon + dlon, category));
            }
        }
        for k in 0..500 {
            let category = if k < 350 { "restaurant" } else { "cafe" };
            spots.push((rng.gen_range(48.842..48.890), rng.gen_range(2.285..2.365), category));
        }

        for (lat, lon, category) in spots {
            let prefixes = if category == "restaurant" { RESTAURANT_PREFIXES } else { CAFE_PREFIXES };
            let name = loop {
                let candidate = format!(
                    "{} {}{}",
                    prefixes.choose(&mut rng).unwrap(),
                    CORES.choose(&mut rng).unwrap(),
                    SUFFIXES.choose(&mut rng).unwrap()
                );
                if names.insert(candidate.clone()) {
                    break candidate;
                }
            };
            let (lat, lon) = (grid(lat), grid(lon));
            let here = LatLng::new(lat, lon).unwrap();
            let postcode = LANDMARKS
                .iter()
                .min_by(|a, b| {
                    let da = haversine_distance(here, LatLng::new(a.lat, a.lon).unwrap());
                    let db = haversine_distance(here, LatLng::new(b.lat, b.lon).unwrap());
                    da.total_cmp(&db)
                })
                .map(|l| l.postcode)
                .unwrap();
            let rating = (!rng.gen_bool(0.08)).then(|| ((3.4 + rng.gen::<f64>() * 1.5) * 10.0).round().min(49.0) / 10.0);
            let price = (!rng.gen_bool(0.1)).then(|| [1, 2, 2, 2, 3, 3, 4][rng.gen_range(0..7)]);
            let hours = if category == "restaurant" { restaurant_hours(&mut rng) } else { cafe_hours(&mut rng) };
            let reviews = (0..rng.gen_range(1..4))
                .map(|_| {
                    REVIEW_PATTERNS
                        .choose(&mut rng)
                        .unwrap()
                        .replace("{dish}", DISHES.choose(&mut rng).unwrap())
                })
                .collect();
            pois.push(Poi {
                name,
                aliases: Vec::new(),
                category,
                lat,
                lon,
                street: format!("{} {}", rng.gen_range(1..120), STREETS.choose(&mut rng).unwrap()),
                postcode: postcode.to_string(),
                google_id: random_id(&mut rng, "ChIJ", 23),
                tomtom_id: random_id(&mut rng, "", 22),
                osm_type: 'N',
                osm_id: rng.gen_range(1_000_000_000..9_999_999_999),
                rating,
                price,
                hours,
                reviews,
                wheelchair: [maybe_bool(&mut rng), maybe_bool(&mut rng), maybe_bool(&mut rng)],
            });
        }
        World { pois }
    }

    pub fn by_google_id(&self, id: &str) -> Option<&Poi> {
        self.pois.iter().find(|p| p.google_id == id)
    }

    pub fn by_tomtom_id(&self, id: &str) -> Option<&Poi> {
        self.pois.iter().find(|p| p.tomtom_id == id)
    }

    pub fn by_osm(&self, kind: char, id: u64) -> Option<&Poi> {
        self.pois.iter().find(|p| p.osm_type == kind && p.osm_id == id)
    }

    /// Free-text matching: an exact name wins, then the number of query
    /// words found in the name, aliases or category.
    pub fn text_search(&self, query: &str, limit: usize) -> Vec<&Poi> {
        let q = fold(query);
        let words: Vec<&str> = q.split_whitespace().filter(|w| w.len() >= 3).collect();
        let mut scored: Vec<(usize, &Poi)> = self
            .pois
            .iter()
            .filter_map(|p| {
                let name = fold(&p.name);
                if name == q || p.aliases.contains(&q) {
                    return Some((1000, p));
                }
                let haystack = format!("{name} {} {}", p.aliases.join(" "), p.category);
                let hits = words
                    .iter()
                    .filter(|w| haystack.split_whitespace().any(|h| h.trim_end_matches('s') == w.trim_end_matches('s')))
                    .count();
                (hits > 0).then_some((hits * 10 + usize::from(p.is_landmark()), p))
            })
            .collect();
        scored.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.name.cmp(&b.1.name)));
        scored.into_iter().take(limit).map(|(_, p)| p).collect()
    }

    /// Places of `category` within `radius` meters, closest first.
    pub fn nearby(&self, center: LatLng, category: &str, radius: f64, limit: usize) -> Vec<(&Poi, f64)> {
        let mut found: Vec<(&Poi, f64)> = self
            .pois
            .iter()
            .filter(|p| p.category == category)
            .map(|p| (p, haversine_distance(center, p.location())))
            .filter(|(_, d)| *d <= radius)
            .collect();
        found.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.name.cmp(&b.0.name)));
        found.truncate(limit);
        found
    }

    /// Places matching `query` within `buffer` meters of any route vertex,
    /// in the provider's relevance order (here: by rating, then id).
    pub fn along_route(&self, route: &[LatLng], query: &str, buffer: f64, limit: usize) -> Vec<&Poi> {
        let q = fold(query);
        let mut found: Vec<&Poi> = self
            .pois
            .iter()
            .filter(|p| q.contains(p.category) || fold(&p.name).contains(&q))
            .filter(|p| route.iter().any(|v| haversine_distance(*v, p.location()) <= buffer))
            .collect();
        found.sort_by(|a, b| {
            b.rating
                .unwrap_or(0.0)
                .total_cmp(&a.rating.unwrap_or(0.0))
                .then_with(|| a.google_id.cmp(&b.google_id))
        });
        found.truncate(limit);
        found
    }
}

/// Lowercase with common French accents removed.
pub fn fold(text: &str) -> String {
    text.to_lowercase()
        .chars()
        .map(|c| match c {
            'é' | 'è' | 'ê' | 'ë' => 'e',
            'à' | 'â' => 'a',
            'ô' => 'o',
            'î' | 'ï' => 'i',
            'û' | 'ù' => 'u',
            'ç' => 'c',
            'œ' => 'o',
            other => other,
        })
        .collect::<String>()
        .replace('\'', " ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Drive,
    Walk,
    Bicycle,
    Motorcycle,
}

impl Mode {
    fn speed(self) -> f64 {
        match self {
            Mode::Drive => 7.5,
            Mode::Walk => 1.35,
            Mode::Bicycle => 4.2,
            Mode::Motorcycle => 8.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Step {
    pub instruction: String,
    pub distance: f64,
    pub offset: f64,
    pub duration: f64,
}

#[derive(Debug, Clone)]
pub struct SynthRoute {
    pub legs: Vec<Vec<LatLng>>,
    pub distance: f64,
    pub duration: f64,
    pub steps: Vec<Step>,
    pub description: String,
}

impl SynthRoute {
    pub fn points(&self) -> Vec<LatLng> {
        let mut out: Vec<LatLng> = Vec::new();
        for leg in &self.legs {
            let skip = usize::from(!out.is_empty());
            out.extend(leg.iter().skip(skip));
        }
        out
    }
}

fn compass(from: LatLng, to: LatLng) -> &'static str {
    let dy = to.latitude() - from.latitude();
    let dx = (to.longitude() - from.longitude()) * from.latitude().to_radians().cos();
    let angle = dy.atan2(dx).to_degrees();
    match angle {
        a if (-45.0..45.0).contains(&a) => "east",
        a if (45.0..135.0).contains(&a) => "north",
        a if (-135.0..-45.0).contains(&a) => "south",
        _ => "west",
    }
}

/// A gently curved path through `waypoints`. Alternative `alt` bends to the
/// other side and a little further, so it is always longer.
pub fn synth_route(waypoints: &[LatLng], mode: Mode, alt: usize) -> SynthRoute {
    let sign = if alt.is_multiple_of(2) { 1.0 } else { -1.0 };
    let bend = sign * (0.06 + 0.14 * alt as f64);
    let mut legs = Vec::new();
    let mut steps = Vec::new();
    let mut total = 0.0;
    let mut street_counter = waypoints
        .iter()
        .map(|w| (w.latitude() * 1e4) as i64 + (w.longitude() * 1e4) as i64)
        .sum::<i64>()
        .unsigned_abs() as usize
        + alt * 7;
    for pair in waypoints.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let length = haversine_distance(a, b);
        let n = ((length / 35.0).ceil() as usize).max(8);
        let (dlat, dlon) = (b.latitude() - a.latitude(), b.longitude() - a.longitude());
        let mut leg = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let t = i as f64 / n as f64;
            let off = bend * (std::f64::consts::PI * t).sin() + 0.015 * (3.0 * std::f64::consts::PI * t).sin();
            let lat = a.latitude() + dlat * t - dlon * off;
            let lon = a.longitude() + dlon * t + dlat * off;
            leg.push(LatLng::new(grid(lat), grid(lon)).unwrap());
        }
        let cuts = [0, n / 4, n / 2, 3 * n / 4, n];
        for (k, window) in cuts.windows(2).enumerate() {
            let segment: f64 = leg[window[0]..=window[1]]
                .windows(2)
                .map(|s| haversine_distance(s[0], s[1]))
                .sum();
            let street = STREETS[street_counter % STREETS.len()];
            street_counter += 3;
            let instruction = match k {
                0 => format!("Head {} on {street}", compass(leg[window[0]], leg[window[1]])),
                1 => format!("Turn left onto {street}"),
                2 => format!("Continue onto {street}"),
                _ => format!("Turn right onto {street}"),
            };
            steps.push(Step {
                instruction,
                distance: segment,
                offset: total,
                duration: segment / mode.speed(),
            });
            total += segment;
        }
        legs.push(leg);
    }
    steps.push(Step {
        instruction: "Arrive at your destination".to_string(),
        distance: 0.0,
        offset: total,
        duration: 0.0,
    });
    let description = steps
        .iter()
        .max_by(|a, b| a.distance.total_cmp(&b.distance))
        .and_then(|s| s.instruction.split(" on ").nth(1).or_else(|| s.instruction.split(" onto ").nth(1)))
        .unwrap_or("local roads")
        .to_string();
    let turns = (steps.len() - 1) as f64;
    SynthRoute {
        legs,
        distance: total,
        duration: total / mode.speed() + turns * 6.0,
        steps,
        description,
    }
}
