//! Synthetic retrieval corpus: boilerplate-heavy pages around topical
//! articles, and toy scoring services for recording a cassette.

use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::json;

use super::Request;

pub struct Topic {
    pub name: &'static str,
    pub words: &'static [&'static str],
    pub queries: &'static [&'static str],
}

pub const TOPICS: &[Topic] = &[
    Topic {
        name: "wrestling",
        words: &[
            "royal",
            "rumble",
            "wrestler",
            "match",
            "championship",
            "arena",
            "ring",
            "title",
            "entrant",
            "elimination",
            "pay",
            "view",
            "winner",
            "event",
            "roster",
        ],
        queries: &[
            "who won the royal rumble in 2018",
            "how many entrants are in the royal rumble match",
        ],
    },
    Topic {
        name: "astronomy",
        words: &[
            "planet",
            "orbit",
            "telescope",
            "galaxy",
            "comet",
            "nebula",
            "star",
            "eclipse",
            "moon",
            "solar",
            "gravity",
            "observatory",
            "light",
            "year",
            "asteroid",
        ],
        queries: &[
            "when is the next total solar eclipse",
            "how far is the nearest galaxy",
        ],
    },
    Topic {
        name: "cooking",
        words: &[
            "recipe",
            "oven",
            "flour",
            "butter",
            "bake",
            "minutes",
            "dough",
            "sauce",
            "garlic",
            "simmer",
            "roast",
            "pepper",
            "salt",
            "kitchen",
            "ingredient",
        ],
        queries: &[
            "how long to bake bread dough",
            "what temperature to roast garlic",
        ],
    },
    Topic {
        name: "rail",
        words: &[
            "train",
            "railway",
            "station",
            "locomotive",
            "track",
            "gauge",
            "steam",
            "passenger",
            "freight",
            "line",
            "signal",
            "timetable",
            "platform",
            "carriage",
            "depot",
        ],
        queries: &[
            "when was the first steam locomotive built",
            "what is standard railway gauge",
        ],
    },
    Topic {
        name: "botany",
        words: &[
            "plant",
            "leaf",
            "root",
            "flower",
            "seed",
            "soil",
            "photosynthesis",
            "species",
            "pollen",
            "stem",
            "garden",
            "water",
            "sunlight",
            "bloom",
            "fern",
        ],
        queries: &[
            "how does photosynthesis work in a leaf",
            "which flower species bloom in winter",
        ],
    },
    Topic {
        name: "finance",
        words: &[
            "interest",
            "rate",
            "bank",
            "loan",
            "mortgage",
            "inflation",
            "bond",
            "stock",
            "market",
            "dividend",
            "credit",
            "savings",
            "currency",
            "budget",
            "tax",
        ],
        queries: &[
            "how does inflation affect mortgage interest rate",
            "what is a bond dividend",
        ],
    },
    Topic {
        name: "music",
        words: &[
            "album", "band", "guitar", "chord", "melody", "tour", "concert", "song", "record",
            "drummer", "vocalist", "studio", "release", "chart", "lyrics",
        ],
        queries: &[
            "which album topped the chart in 1991",
            "who was the drummer on the tour",
        ],
    },
    Topic {
        name: "medicine",
        words: &[
            "vaccine",
            "dose",
            "patient",
            "symptom",
            "clinic",
            "doctor",
            "trial",
            "immune",
            "virus",
            "treatment",
            "fever",
            "hospital",
            "therapy",
            "diagnosis",
            "nurse",
        ],
        queries: &[
            "how many vaccine dose are recommended",
            "what are common fever symptom treatment",
        ],
    },
    Topic {
        name: "geography",
        words: &[
            "river",
            "mountain",
            "valley",
            "border",
            "capital",
            "population",
            "island",
            "coast",
            "desert",
            "lake",
            "region",
            "climate",
            "city",
            "elevation",
            "delta",
        ],
        queries: &[
            "what is the longest river delta",
            "which capital city has the highest elevation",
        ],
    },
    Topic {
        name: "software",
        words: &[
            "compiler", "function", "memory", "thread", "bug", "release", "version", "library",
            "server", "database", "query", "cache", "latency", "kernel", "module",
        ],
        queries: &[
            "how to reduce database query latency",
            "which compiler version fixed the memory bug",
        ],
    },
];

const FILLER: &[&str] = &[
    "the", "a", "of", "and", "to", "in", "is", "was", "for", "on", "with", "as", "by", "at",
    "from", "that", "this", "it", "its", "an", "were", "are", "be", "has", "had", "which", "after",
    "before", "during", "many", "most", "first", "second", "new", "old", "large", "small", "early",
    "late", "known", "called", "made", "found", "used", "often", "also", "more", "than", "about",
    "over",
];

const BOILER: &[&str] = &[
    "home",
    "about",
    "contact",
    "privacy",
    "terms",
    "subscribe",
    "login",
    "register",
    "share",
    "cookie",
    "policy",
    "advertisement",
    "sponsored",
    "newsletter",
    "sitemap",
    "careers",
    "help",
    "menu",
    "search",
    "trending",
    "popular",
    "related",
    "comments",
    "copyright",
    "rights",
];

fn sentence<R: Rng>(rng: &mut R, topic: &Topic) -> String {
    let n = rng.gen_range(8..22);
    let mut words: Vec<String> = (0..n)
        .map(|_| {
            let w = if rng.gen_bool(0.35) {
                *topic.words.choose(rng).unwrap()
            } else {
                *FILLER.choose(rng).unwrap()
            };
            if rng.gen_bool(0.04) {
                format!("{}", rng.gen_range(1890..2024))
            } else {
                w.to_string()
            }
        })
        .collect();
    let mut first = words[0].chars();
    words[0] = match first.next() {
        Some(c) => c.to_uppercase().collect::<String>() + first.as_str(),
        None => String::new(),
    };
    words.join(" ") + "."
}

fn paragraph<R: Rng>(rng: &mut R, topic: &Topic) -> String {
    let mut out = String::new();
    for i in 0..rng.gen_range(2..6) {
        if i > 0 {
            out.push(' ');
        }
        let s = sentence(rng, topic);
        match rng.gen_range(0..10) {
            0 => out.push_str(&format!("<b>{s}</b>")),
            1 => out.push_str(&format!(
                "<a href=\"/wiki/{}\" class=\"mw-link\" title=\"x\">{s}</a>",
                topic.name
            )),
            2 => out.push_str(&format!("<em>{s}</em>")),
            _ => out.push_str(&s),
        }
    }
    out
}

fn boiler_words<R: Rng>(rng: &mut R, n: usize) -> String {
    (0..n)
        .map(|_| *BOILER.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

fn script<R: Rng>(rng: &mut R) -> String {
    let mut s = String::from("window.dataLayer = window.dataLayer || [];\n");
    for i in 0..rng.gen_range(20..80) {
        s.push_str(&format!(
            "function track{i}(e){{ if (e && e.target) {{ dataLayer.push({{'event':'click','id':{},'ts':Date.now()}}); }} return i < 3 && x > 2; }}\n",
            rng.gen::<u32>()
        ));
    }
    s
}

fn style<R: Rng>(rng: &mut R) -> String {
    let mut s = String::new();
    for i in 0..rng.gen_range(30..120) {
        s.push_str(&format!(
            ".c{i} > .item:hover {{ color: #{:06x}; margin: 0 {}px; font-family: \"Helvetica Neue\", sans-serif; }}\n",
            rng.gen_range(0..0xffffff),
            rng.gen_range(0..40)
        ));
    }
    s
}

/// A page with head payloads, navigation, ads and an article on `topic`.
pub fn page<R: Rng>(rng: &mut R, topic: &Topic, title_no: usize) -> String {
    let mut h = String::new();
    h.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
    h.push_str(&format!(
        "<title>{} article {title_no} | Example Site</title>\n",
        topic.name
    ));
    h.push_str("<meta name=\"viewport\" content=\"width=device-width, initial-scale=1\">\n");
    h.push_str("<link rel=\"stylesheet\" href=\"/static/main.css\">\n");
    h.push_str(&format!("<style>\n{}</style>\n", style(rng)));
    h.push_str(&format!("<script>\n{}</script>\n", script(rng)));
    h.push_str("<script type=\"application/ld+json\">{\"@context\":\"https://schema.org\",\"@type\":\"Article\"}</script>\n");
    h.push_str("</head>\n<body class=\"skin-vector\" onload=\"init()\">\n");
    h.push_str("<!-- header -->\n<header id=\"top\"><div class=\"logo\"><a href=\"/\"><img src=\"/logo.png\" alt=\"Example\"></a></div>\n<nav><ul>");
    for _ in 0..rng.gen_range(5..12) {
        h.push_str(&format!(
            "<li class=\"nav-item\"><a href=\"/{0}\">{0}</a></li>",
            boiler_words(rng, 1)
        ));
    }
    h.push_str("</ul></nav>\n<form action=\"/search\"><input type=\"text\" name=\"q\"><button>Search</button></form></header>\n");
    h.push_str("<div id=\"content\" class=\"container\"><div class=\"row\"><div class=\"col-main\">\n<main><article>\n");
    h.push_str(&format!(
        "<h1 class=\"title\">{}</h1>\n",
        sentence(rng, topic).trim_end_matches('.')
    ));
    h.push_str(&format!(
        "<div class=\"byline\"><span>By staff</span> <time>{}</time></div>\n",
        rng.gen_range(2001..2024)
    ));
    for sec in 0..rng.gen_range(3..7) {
        h.push_str(&format!(
            "<section id=\"s{sec}\"><h2><span class=\"mw-headline\">{}</span></h2>\n",
            sentence(rng, topic).trim_end_matches('.')
        ));
        for _ in 0..rng.gen_range(2..5) {
            h.push_str(&format!(
                "<div class=\"para\"><p>{}</p></div>\n",
                paragraph(rng, topic)
            ));
        }
        if rng.gen_bool(0.3) {
            h.push_str("<table class=\"wikitable\"><tbody><tr><th>Item</th><th>Value</th></tr>");
            for _ in 0..rng.gen_range(2..6) {
                h.push_str(&format!(
                    "<tr><td>{}</td><td>{}</td></tr>",
                    topic.words.choose(rng).unwrap(),
                    rng.gen_range(1..1000)
                ));
            }
            h.push_str("</tbody></table>\n");
        }
        if rng.gen_bool(0.3) {
            h.push_str("<ul class=\"facts\">");
            for _ in 0..rng.gen_range(2..5) {
                h.push_str(&format!("<li>{}</li>", sentence(rng, topic)));
            }
            h.push_str("</ul>\n");
        }
        if rng.gen_bool(0.4) {
            h.push_str(&format!(
                "<div class=\"ad-slot\" data-ad=\"{}\"><iframe src=\"https://ads.example/{}\"></iframe><span class=\"ad-label\">{}</span></div>\n",
                rng.gen::<u16>(),
                rng.gen::<u16>(),
                boiler_words(rng, 2)
            ));
        }
        h.push_str("</section>\n");
    }
    h.push_str("</article></main>\n</div>\n<aside class=\"sidebar\"><div class=\"widget\"><h3>Related</h3><ul>");
    for _ in 0..rng.gen_range(3..8) {
        h.push_str(&format!(
            "<li><a href=\"/r/{}\">{}</a></li>",
            rng.gen::<u16>(),
            {
                let n = rng.gen_range(2..5);
                boiler_words(rng, n)
            }
        ));
    }
    h.push_str("</ul></div>\n<div class=\"widget\"><div><div><span></span></div></div></div></aside>\n</div></div>\n");
    h.push_str(&format!(
        "<footer><div class=\"links\"><p>{}</p></div><p class=\"copy\">&copy; {} Example Site. All rights reserved.</p></footer>\n",
        { let n = rng.gen_range(10..30); boiler_words(rng, n) },
        rng.gen_range(2010..2024)
    ));
    h.push_str(&format!(
        "<script src=\"/static/app.js\"></script>\n<script>\n{}</script>\n<noscript><img src=\"/pixel.gif\"></noscript>\n</body>\n</html>\n",
        script(rng)
    ));
    h
}

fn terms(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

fn hashed(text: &str) -> [f64; 64] {
    let mut v = [0.0; 64];
    for t in terms(text) {
        let mut h: u64 = 0xcbf29ce484222325;
        for b in t.bytes() {
            h = (h ^ b as u64).wrapping_mul(0x100000001b3);
        }
        v[(h % 64) as usize] += 1.0;
    }
    v
}

/// Cosine similarity of hashed bag-of-words vectors.
pub fn toy_similarity(query: &str, text: &str) -> f64 {
    let (a, b) = (hashed(query), hashed(text));
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

pub fn embed_handler(req: &Request) -> (u16, String) {
    let v = req.json();
    let query = v["query"].as_str().unwrap_or("");
    let scores: Vec<f64> = v["texts"]
        .as_array()
        .map(|ts| {
            ts.iter()
                .map(|t| toy_similarity(query, t.as_str().unwrap_or("")))
                .collect()
        })
        .unwrap_or_default();
    (200, json!({ "scores": scores }).to_string())
}

/// Serves the seeded hash provider over the logits wire format.
pub fn logits_handler(seed: u64) -> impl Fn(&Request) -> (u16, String) + Send + Sync + 'static {
    use blockprune_core::{HashLogits, LogitsProvider, TokenId};
    let provider = HashLogits { seed };
    move |req| {
        let v = req.json();
        let ids = |k: &str| -> Vec<TokenId> {
            v[k].as_array()
                .map(|a| {
                    a.iter()
                        .filter_map(|x| x.as_u64())
                        .map(|x| x as TokenId)
                        .collect()
                })
                .unwrap_or_default()
        };
        match provider.logits(&ids("prefix_tokens"), &ids("candidates")) {
            Ok(logits) => (200, json!({ "logits": logits }).to_string()),
            Err(e) => (400, json!({ "error": e }).to_string()),
        }
    }
}
