//! Regenerates the synthetic corpus under `data/`.
//!
//! ```text
//! cargo run -p childadapt --example gen_fixture
//! ```
//!
//! Originals are composed from verbose, adverb-heavy narrative templates and
//! adapted texts from plain ones describing the same events, so the pair
//! relationship is known by construction. Output is deterministic.

use std::fs;
use std::path::Path;

use childadapt::corpus::{make_split, Dataset, DatasetRecord, Novel, Split};
use childadapt::decoding::training_text;
use childadapt::instruction::{
    personality_prompt, render_personality_response, write_fixture, CharacterProfile, RecordTriplets, TraitScore,
    Traits, Triplet, DEFAULT_MODEL,
};
use childadapt::lm::NgramModel;
use childadapt::resources::FIXTURE_TEST_PER_NOVEL;
use childadapt::rng;
use rand::seq::IndexedRandom;
use rand::Rng;

const SEED: u64 = 42;
const MODEL_ORDER: usize = 3;
const MODEL_ALPHA: f64 = 0.01;
/// Records whose triplet responses are stored as annotation fixtures.
const TRIPLET_FIXTURES: usize = 20;

struct Cast {
    novel: Novel,
    prefix: &'static str,
    records: usize,
    people: &'static [(&'static str, &'static [&'static str])],
    places: &'static [&'static str],
}

const CASTS: [Cast; 4] = [
    Cast {
        novel: Novel::JourneyToTheWest,
        prefix: "xyj",
        records: 160,
        people: &[
            ("孙悟空", &["悟空", "行者", "美猴王"]),
            ("唐僧", &["三藏", "唐三藏"]),
            ("猪八戒", &["八戒"]),
            ("沙僧", &["沙和尚"]),
            ("观音菩萨", &["菩萨"]),
            ("白骨精", &[]),
            ("牛魔王", &[]),
            ("红孩儿", &[]),
        ],
        places: &["花果山", "水帘洞", "五庄观", "火焰山", "流沙河", "灵山", "高老庄"],
    },
    Cast {
        novel: Novel::ThreeKingdoms,
        prefix: "sg",
        records: 150,
        people: &[
            ("刘备", &["玄德"]),
            ("关羽", &["云长", "关公"]),
            ("张飞", &["翼德"]),
            ("诸葛亮", &["孔明"]),
            ("曹操", &["孟德"]),
            ("赵云", &["子龙"]),
            ("孙权", &[]),
            ("周瑜", &["公瑾"]),
        ],
        places: &["荆州", "赤壁", "许昌", "长坂坡", "隆中", "成都", "江东"],
    },
    Cast {
        novel: Novel::WaterMargin,
        prefix: "sh",
        records: 150,
        people: &[
            ("宋江", &["公明"]),
            ("林冲", &["豹子头"]),
            ("武松", &[]),
            ("鲁智深", &["花和尚"]),
            ("李逵", &["黑旋风"]),
            ("吴用", &["智多星"]),
            ("高俅", &[]),
            ("晁盖", &[]),
        ],
        places: &["梁山泊", "景阳冈", "野猪林", "东京", "沧州", "大名府", "快活林"],
    },
    Cast {
        novel: Novel::RedChamber,
        prefix: "hl",
        records: 140,
        people: &[
            ("贾宝玉", &["宝玉"]),
            ("林黛玉", &["黛玉"]),
            ("薛宝钗", &["宝钗"]),
            ("王熙凤", &["凤姐"]),
            ("贾母", &["老太太"]),
            ("史湘云", &["湘云"]),
            ("袭人", &[]),
            ("刘姥姥", &[]),
        ],
        places: &["大观园", "潇湘馆", "怡红院", "荣国府", "蘅芜苑", "栊翠庵"],
    },
];

/// (verbose template, plain template, relation, tail slot). Slots: `{a}` and
/// `{b}` are characters, `{p}` a place.
const EVENTS: &[(&str, &str, &str, &str)] = &[
    (
        "{a}闻得{b}之言，心中甚是欢喜，遂与{b}同往{p}而去。",
        "{a}听了{b}的话，很高兴，和{b}一起去了{p}。",
        "同往",
        "p",
    ),
    (
        "却说{a}独自来到{p}，只见那里烟雾缭绕，竟不知身在何处。",
        "{a}一个人来到{p}，那里有很多雾。",
        "来到",
        "p",
    ),
    (
        "{a}大怒，乃拔出兵器，径直向{b}杀去，{b}亦不敢怠慢，遂急忙招架。",
        "{a}生气了，拿起兵器去打{b}。",
        "攻打",
        "b",
    ),
    (
        "{b}连忙稽首道：“望{a}恕罪！”{a}却只是冷笑，并不答话。",
        "{b}向{a}认错，{a}没有说话。",
        "冷落",
        "b",
    ),
    (
        "{a}与{b}于{p}中饮酒，直至夜深，方才各自散去。",
        "{a}和{b}在{p}喝酒，天黑了才走。",
        "饮酒",
        "b",
    ),
    (
        "那{p}之中，忽有一阵狂风骤起，{a}急忙躲避，然终究被困于此。",
        "{p}里忽然刮起大风，{a}被困住了。",
        "被困",
        "p",
    ),
    (
        "{a}暗暗思忖，若非{b}相助，此事断然难以成就，故而修书一封，遣人送往{p}。",
        "{a}想请{b}帮忙，就写了一封信送到{p}。",
        "求助",
        "b",
    ),
    (
        "{b}见{a}如此英勇，不禁连声称赞，且又赠以宝物，以表敬意。",
        "{b}看到{a}很勇敢，送给{a}一件宝物。",
        "称赞",
        "a",
    ),
    (
        "{a}遂辞别{b}，收拾行装，星夜赶往{p}，一路上并不停歇。",
        "{a}告别了{b}，连夜去{p}。",
        "前往",
        "p",
    ),
    (
        "众人皆言{a}有勇有谋，然{b}却不以为然，反而屡屡与之争辩。",
        "大家都说{a}聪明，{b}不同意。",
        "争辩",
        "a",
    ),
];

/// Scene-setting sentences used only in originals.
const NARRATION: &[&str] = &[
    "话说{p}地界，自古以来便是人烟稀少之处，然而其中景致却甚为奇绝。",
    "正是：欲知后事如何，且看下文分解。",
    "当时天色已晚，众人皆已疲惫不堪，遂于{p}附近暂且歇息。",
    "此事传扬开去，远近之人无不惊叹，亦有人暗自揣度其中缘故。",
    "看官听说，原来这{p}本是一处险要之地，历来兵家必争。",
    "却说次日清晨，东方既白，霞光万道，瑞气千条。",
];

const DESCRIPTIONS: &[&str] = &[
    "谨慎稳重",
    "忠诚可靠",
    "沉默寡言",
    "温和友善",
    "多愁善感",
    "足智多谋",
    "勇猛直率",
    "心思细腻",
    "豪爽大方",
    "严于律己",
    "胆小怕事",
    "好奇多问",
    "热情开朗",
    "固执己见",
    "宽厚仁慈",
    "机敏灵活",
];

fn fill(template: &str, a: &str, b: &str, p: &str) -> String {
    template.replace("{a}", a).replace("{b}", b).replace("{p}", p)
}

fn profile(cast: &Cast, name: &str, aliases: &[&str], rng: &mut impl Rng) -> CharacterProfile {
    let traits = if name == "孙悟空" {
        Traits::from_array([
            TraitScore::new(5, "创新冒险"),
            TraitScore::new(3, "随性自由"),
            TraitScore::new(4, "活泼好动"),
            TraitScore::new(3, "慷慨侠义"),
            TraitScore::new(2, "冲动易怒"),
        ])
    } else {
        Traits::from_array(std::array::from_fn(|_| {
            TraitScore::new(rng.random_range(1..=5), *DESCRIPTIONS.choose(rng).unwrap())
        }))
    };
    CharacterProfile {
        novel: cast.novel.clone(),
        name: name.to_string(),
        aliases: aliases.iter().map(|a| a.to_string()).collect(),
        traits,
    }
}

fn record(cast: &Cast, index: usize, rng: &mut impl Rng) -> (DatasetRecord, Vec<Triplet>) {
    let mut original = Vec::new();
    let mut adapted = Vec::new();
    let mut triplets = Vec::new();
    let events = rng.random_range(5..=8);
    let kept = rng.random_range(3..=events.min(5));
    for e in 0..events {
        let picks: Vec<&(&str, &[&str])> = cast.people.choose_multiple(rng, 2).collect();
        let (a, b) = (picks[0].0, picks[1].0);
        // originals refer to people by alias about a third of the time
        let a_orig = match picks[0].1.choose(rng) {
            Some(alias) if rng.random_bool(0.35) => alias,
            _ => a,
        };
        let p = *cast.places.choose(rng).unwrap();
        if rng.random_bool(0.5) {
            original.push(fill(NARRATION.choose(rng).unwrap(), a, b, p));
        }
        let (verbose, plain, relation, tail) = *EVENTS.choose(rng).unwrap();
        original.push(fill(verbose, a_orig, b, p));
        if e < kept {
            adapted.push(fill(plain, a, b, p));
            let (head, tail) = match tail {
                "p" => (a, p),
                "a" => (b, a),
                _ => (a, b),
            };
            triplets.push(Triplet::new(head, relation, tail).expect("template triplets are valid"));
        }
    }
    let rec = DatasetRecord {
        id: format!("{}-{:04}", cast.prefix, index + 1),
        novel: cast.novel.clone(),
        chapter: (index / 3 + 1) as u32,
        original: original.concat(),
        adapted: adapted.concat(),
        split: Split::Train,
    };
    (rec, triplets)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let mut stream = rng::stream(SEED);

    let mut profiles = Vec::new();
    let mut records = Vec::new();
    let mut triplets = Vec::new();
    for cast in &CASTS {
        for (name, aliases) in cast.people {
            profiles.push(profile(cast, name, aliases, &mut stream));
        }
        for i in 0..cast.records {
            let (rec, ts) = record(cast, i, &mut stream);
            triplets.push(RecordTriplets {
                record_id: rec.id.clone(),
                triplets: ts,
            });
            records.push(rec);
        }
    }
    let dataset = make_split(&Dataset::new(records)?, FIXTURE_TEST_PER_NOVEL, SEED)?;
    dataset.save(&data.join("fixture_dataset.jsonl"))?;
    fs::write(
        data.join("fixture_profiles.json"),
        serde_json::to_string_pretty(&profiles)? + "\n",
    )?;
    childadapt::instruction::save_triplets(&triplets, &data.join("fixture_triplets.json"))?;

    let fixtures = data.join("fixtures");
    if fixtures.exists() {
        fs::remove_dir_all(&fixtures)?;
    }
    fs::create_dir_all(&fixtures)?;
    for p in &profiles {
        let prompt = personality_prompt(p.novel.title(), &p.name);
        write_fixture(
            &fixtures,
            DEFAULT_MODEL,
            &prompt,
            &render_personality_response(&p.traits),
        )?;
    }
    for (rec, ts) in dataset.records().iter().zip(&triplets).take(TRIPLET_FIXTURES) {
        let response: Vec<String> = ts
            .triplets
            .iter()
            .map(|t| format!("<{}, {}, {}>", t.head, t.relation, t.tail))
            .collect();
        let prompt = childadapt::instruction::triplet_prompt(&rec.original);
        write_fixture(&fixtures, DEFAULT_MODEL, &prompt, &response.join("，"))?;
    }

    // An order-3 model conditions on the last two characters only, so the
    // instruction body contributes nothing but noise; it is left out.
    let corpus: Vec<String> = dataset
        .records()
        .iter()
        .filter(|r| r.split == Split::Train)
        .map(|r| training_text("", &r.adapted))
        .collect();
    let model = NgramModel::train(&corpus, MODEL_ORDER, MODEL_ALPHA)?;
    model.save(&data.join("fixture.ngram"))?;

    println!(
        "{} records ({:?}), {} profiles, model vocabulary {}",
        dataset.len(),
        dataset.split_counts(),
        profiles.len(),
        childadapt::lm::LanguageModel::vocab(&model).len()
    );
    Ok(())
}
