#!/usr/bin/env python3
"""Regenerates the MedPix-style fixture: 12 cases, 6 topics, 8 questions.

The field inventory spans 88 distinct element types (57 under Cases, 31
under Topic). Images are synthetic grayscale radiograph stand-ins; cases
MPX1007 and MPX1008 share one image under two file names so importers can
be checked for content deduplication.

Usage: python3 generate.py   (writes next to this file)
"""

import hashlib
import io
import json
import random
from pathlib import Path

from PIL import Image, ImageDraw, ImageFilter

ROOT = Path(__file__).resolve().parent
PAGE_SIZE = 5


def radiograph(seed, size, shapes):
    rnd = random.Random(seed)
    w, h = size
    img = Image.new("L", size, 18)
    d = ImageDraw.Draw(img)
    for kind, box, shade in shapes:
        if kind == "ellipse":
            d.ellipse(box, fill=shade)
        else:
            d.rectangle(box, fill=shade)
    img = img.filter(ImageFilter.GaussianBlur(3))
    px = img.load()
    for _ in range(w * h // 6):
        x, y = rnd.randrange(w), rnd.randrange(h)
        px[x, y] = max(0, min(255, px[x, y] + rnd.randint(-18, 18)))
    return img


def foot():
    shapes = [("ellipse", (40, 150, 170, 250), 170)]  # calcaneus
    for i in range(5):
        y = 60 + i * 38
        shapes.append(("rectangle", (160, y, 330, y + 18), 200))  # metatarsals
    shapes.append(("rectangle", (128, 96, 142, 128), 60))  # lucent line near 5th MT base
    return shapes


def chest():
    return [
        ("ellipse", (40, 40, 150, 240), 60),
        ("ellipse", (170, 40, 280, 240), 60),
        ("rectangle", (148, 20, 172, 250), 190),
        ("ellipse", (200, 110, 240, 150), 210),
    ]


def brain():
    return [
        ("ellipse", (28, 20, 292, 300), 200),
        ("ellipse", (44, 36, 276, 284), 90),
        ("ellipse", (170, 120, 215, 165), 230),
    ]


def knee():
    return [
        ("rectangle", (110, 0, 210, 130), 190),
        ("rectangle", (110, 150, 210, 300), 190),
        ("ellipse", (95, 110, 225, 165), 150),
    ]


def spine():
    return [("rectangle", (120, 20 + i * 44, 200, 54 + i * 44), 185) for i in range(6)]


def abdomen():
    return [
        ("ellipse", (50, 60, 170, 200), 140),
        ("ellipse", (180, 90, 270, 170), 120),
        ("ellipse", (120, 200, 160, 240), 230),
    ]


SHAPES = {"foot": foot, "chest": chest, "brain": brain, "knee": knee, "spine": spine, "abdomen": abdomen}

TOPICS = [
    {
        "topicId": "T201",
        "title": "Jones fracture",
        "category": "Musculoskeletal",
        "subcategory": "Foot and ankle",
        "keywords": ["fifth metatarsal", "stress fracture"],
        "synonyms": ["Proximal fifth metatarsal diaphyseal fracture"],
        "diseaseDiscussion": "Fracture at the metaphyseal-diaphyseal junction of the fifth metatarsal.",
        "etiology": "Adduction force on a plantar-flexed foot or repetitive stress.",
        "pathophysiology": "Watershed blood supply predisposes to delayed union.",
        "epidemiology": "Common in athletes; peak incidence in the third decade.",
        "clinicalPresentation": "Lateral midfoot pain and inability to bear weight.",
        "prognosis": "Non-union in up to a quarter of conservatively treated cases.",
        "treatment": "Non-weight-bearing cast or intramedullary screw fixation.",
        "radiologyFindings": "Transverse lucent line 1.5 to 3 cm distal to the tuberosity.",
        "differentialDiagnosis": "Avulsion fracture of the tuberosity; os peroneum; apophysis.",
        "references": ["Foot Ankle Int 2011;32:839", "Radiographics 2001;21:1425"],
        "acr": {"organ": "Foot", "pathology": "Trauma", "code": "4.41"},
        "author": {"name": "R. Alvarez", "affiliation": "Teaching Hospital Radiology"},
        "revision": {"created": "2012-03-01", "modified": "2019-06-11", "editor": "L. Chen", "status": "published"},
        "externalLinks": ["https://radiopaedia.org/articles/jones-fracture"],
        "audience": "Residents",
    },
    {
        "topicId": "T202",
        "title": "Community-acquired pneumonia",
        "category": "Chest",
        "subcategory": "Infection",
        "keywords": ["consolidation", "air bronchogram"],
        "synonyms": ["Lobar pneumonia"],
        "diseaseDiscussion": "Acute infection of the pulmonary parenchyma acquired outside hospital.",
        "etiology": "Streptococcus pneumoniae is the most frequent organism.",
        "pathophysiology": "Alveolar filling with inflammatory exudate.",
        "epidemiology": "Leading infectious cause of death worldwide.",
        "clinicalPresentation": "Fever, productive cough and pleuritic chest pain.",
        "prognosis": "Good with timely antibiotics.",
        "treatment": "Empirical antibiotics guided by severity scores.",
        "radiologyFindings": "Lobar or segmental consolidation with air bronchograms.",
        "differentialDiagnosis": "Pulmonary oedema; haemorrhage; bronchoalveolar carcinoma.",
        "references": ["Lancet 2015;386:1097"],
        "acr": {"organ": "Lung", "pathology": "Inflammation", "code": "6.2"},
        "author": {"name": "M. Osei", "affiliation": "Chest Imaging Section"},
        "revision": {"created": "2011-09-14", "modified": "2018-01-22", "editor": "M. Osei", "status": "published"},
        "externalLinks": ["https://www.ncbi.nlm.nih.gov/books/NBK430749/"],
        "audience": "Medical students",
    },
    {
        "topicId": "T203",
        "title": "Glioblastoma",
        "category": "Neuroradiology",
        "subcategory": "Neoplasm",
        "keywords": ["ring enhancement", "necrosis", "butterfly glioma"],
        "synonyms": ["Glioblastoma multiforme", "WHO grade 4 astrocytoma"],
        "diseaseDiscussion": "Most common primary malignant brain tumour in adults.",
        "etiology": "Mostly sporadic; ionising radiation is an established risk.",
        "pathophysiology": "Microvascular proliferation and pseudopalisading necrosis.",
        "epidemiology": "Peak incidence in the sixth and seventh decades.",
        "clinicalPresentation": "Headache, seizures and progressive focal deficit.",
        "prognosis": "Median survival around 15 months with treatment.",
        "treatment": "Maximal safe resection, radiotherapy and temozolomide.",
        "radiologyFindings": "Irregular ring-enhancing mass with central necrosis and oedema.",
        "differentialDiagnosis": "Metastasis; abscess; tumefactive demyelination.",
        "references": ["N Engl J Med 2005;352:987", "AJNR 2016;37:1982"],
        "acr": {"organ": "Brain", "pathology": "Neoplasm", "code": "1.3"},
        "author": {"name": "S. Novak", "affiliation": "Neuroradiology Unit"},
        "revision": {"created": "2010-05-02", "modified": "2020-02-17", "editor": "L. Chen", "status": "published"},
        "externalLinks": ["https://radiopaedia.org/articles/glioblastoma", "https://www.cancer.gov/types/brain"],
        "audience": "Residents",
    },
    {
        "topicId": "T204",
        "title": "Anterior cruciate ligament tear",
        "category": "Musculoskeletal",
        "subcategory": "Knee",
        "keywords": ["ACL", "bone bruise"],
        "synonyms": ["ACL rupture"],
        "diseaseDiscussion": "Disruption of the primary restraint to anterior tibial translation.",
        "etiology": "Pivoting injury with valgus load.",
        "pathophysiology": "Intrasubstance failure, usually mid-substance.",
        "epidemiology": "Frequent in pivoting sports; higher risk in female athletes.",
        "clinicalPresentation": "Pop, rapid haemarthrosis and instability.",
        "prognosis": "Early osteoarthritis is common regardless of treatment.",
        "treatment": "Reconstruction in active patients; rehabilitation otherwise.",
        "radiologyFindings": "Discontinuous ligament fibres with kissing contusions.",
        "differentialDiagnosis": "Partial tear; mucoid degeneration.",
        "references": ["Radiology 2009;250:675"],
        "acr": {"organ": "Knee", "pathology": "Trauma", "code": "4.51"},
        "author": {"name": "R. Alvarez", "affiliation": "Teaching Hospital Radiology"},
        "revision": {"created": "2013-07-30", "modified": "2017-11-03", "editor": "J. Park", "status": "published"},
        "externalLinks": ["https://radiopaedia.org/articles/anterior-cruciate-ligament-tear"],
        "audience": "Residents",
    },
    {
        "topicId": "T205",
        "title": "Vertebral compression fracture",
        "category": "Musculoskeletal",
        "subcategory": "Spine",
        "keywords": ["osteoporosis", "wedge deformity"],
        "synonyms": ["Osteoporotic vertebral fracture"],
        "diseaseDiscussion": "Loss of vertebral body height from axial loading.",
        "etiology": "Osteoporosis, trauma or neoplastic infiltration.",
        "pathophysiology": "Trabecular failure of the anterior column.",
        "epidemiology": "Most common osteoporotic fracture.",
        "clinicalPresentation": "Acute back pain, often after minor trauma.",
        "prognosis": "Pain usually resolves within three months.",
        "treatment": "Analgesia, bracing; vertebral augmentation in selected cases.",
        "radiologyFindings": "Anterior wedging with preserved posterior wall.",
        "differentialDiagnosis": "Pathological fracture; Scheuermann disease.",
        "references": ["Radiographics 2011;31:1343"],
        "acr": {"organ": "Spine", "pathology": "Trauma", "code": "3.41"},
        "author": {"name": "J. Park", "affiliation": "Musculoskeletal Section"},
        "revision": {"created": "2014-02-11", "modified": "2018-08-09", "editor": "J. Park", "status": "draft"},
        "externalLinks": ["https://radiopaedia.org/articles/vertebral-compression-fracture"],
        "audience": "Medical students",
    },
    {
        "topicId": "T206",
        "title": "Acute appendicitis",
        "category": "Gastrointestinal",
        "subcategory": "Inflammation",
        "keywords": ["appendicolith", "periappendiceal fat stranding"],
        "synonyms": ["Appendicitis"],
        "diseaseDiscussion": "Inflammation of the vermiform appendix.",
        "etiology": "Luminal obstruction by appendicolith or lymphoid hyperplasia.",
        "pathophysiology": "Obstruction, distension, ischaemia and perforation.",
        "epidemiology": "Lifetime risk of about 7 percent.",
        "clinicalPresentation": "Periumbilical pain migrating to the right iliac fossa.",
        "prognosis": "Excellent after appendicectomy without perforation.",
        "treatment": "Appendicectomy; antibiotics in selected uncomplicated cases.",
        "radiologyFindings": "Dilated appendix over 6 mm with wall enhancement.",
        "differentialDiagnosis": "Mesenteric adenitis; right-sided diverticulitis; ovarian torsion.",
        "references": ["Radiology 2015;276:39"],
        "acr": {"organ": "Bowel", "pathology": "Inflammation", "code": "7.2"},
        "author": {"name": "M. Osei", "affiliation": "Abdominal Imaging"},
        "revision": {"created": "2012-10-05", "modified": "2019-04-21", "editor": "S. Novak", "status": "published"},
        "externalLinks": ["https://radiopaedia.org/articles/acute-appendicitis"],
        "audience": "Medical students",
    },
]

QUESTIONS = {
    "Q301": {
        "stem": "What is the most likely finding on this radiograph of the foot?",
        "choices": [
            "Fracture at the base of the fifth metatarsal",
            "Normal study",
            "Hallux valgus deformity",
            "Plantar calcaneal spur",
        ],
        "answer": 0,
        "explanation": "A transverse lucency crosses the proximal fifth metatarsal diaphysis.",
    },
    "Q302": {
        "stem": "Which sign indicates air-space disease on the chest film?",
        "choices": ["Air bronchogram", "Kerley B lines", "Deep sulcus sign"],
        "answer": 0,
    },
    "Q303": {
        "stem": "Which lobe is involved?",
        "choices": ["Right lower lobe", "Left upper lobe", "Right middle lobe", "Lingula"],
        "answer": 0,
        "explanation": "The opacity silhouettes the right hemidiaphragm.",
    },
    "Q304": {
        "stem": "What is the most likely diagnosis of this enhancing mass?",
        "choices": ["Glioblastoma", "Meningioma", "Arachnoid cyst", "Normal variant", "Colloid cyst"],
        "answer": 0,
    },
    "Q305": {
        "stem": "Which ligament is torn?",
        "choices": ["Anterior cruciate ligament", "Posterior cruciate ligament", "Medial collateral ligament"],
        "answer": 0,
    },
    "Q306": {
        "stem": "Which vertebral column is predominantly involved?",
        "choices": ["Anterior", "Middle", "Posterior"],
        "answer": 0,
    },
    "Q307": {
        "stem": "Which diameter threshold suggests appendicitis on CT?",
        "choices": ["3 mm", "6 mm", "12 mm", "20 mm"],
        "answer": 1,
        "explanation": "An outer diameter above 6 mm is abnormal.",
    },
    "Q308": {
        "stem": "Is the appendicolith visible?",
        "choices": ["Yes", "No"],
        "answer": 0,
    },
}

# (id, title, sex, age, body region, topics, questions, image shape keys, extras)
CASES = [
    ("MPX1001", "Right lower lobe consolidation", "male", 67, "chest", ["T202"], ["Q302", "Q303"], ["chest"], {}),
    ("MPX1002", "Ring-enhancing parietal mass", "female", 58, "brain", ["T203"], ["Q304"], ["brain", "brain2"], {}),
    ("MPX1003", "Knee injury after a ski fall", "female", 24, "knee", ["T204"], ["Q305"], ["knee"], {"no_followup": True}),
    ("MPX1004", "Lateral foot pain in a runner", "male", 27, "foot", ["T201"], ["Q301"], ["foot"], {}),
    ("MPX1005", "Back pain after a minor fall", "female", 74, "spine", ["T205"], ["Q306"], ["spine"], {"no_race": True}),
    ("MPX1006", "Right iliac fossa pain", "male", 19, "abdomen", ["T206"], ["Q307", "Q308"], ["abdomen"], {}),
    ("MPX1007", "Fever and cough", "female", 45, "chest", ["T202"], [], ["shared"], {"no_treatment": True}),
    ("MPX1008", "Follow-up chest film", "male", 52, "chest", ["T202"], [], ["shared"], {"no_followup": True, "no_approved": True}),
    ("MPX1009", "Seizure in an older adult", "male", 63, "brain", ["T203"], [], ["brain3"], {}),
    ("MPX1010", "Foot trauma with swelling", "female", 33, "foot", ["T201", "T204"], [], ["foot2"], {"no_followup": True}),
    ("MPX1011", "Osteoporotic wedge fracture", "female", 81, "spine", ["T205"], [], ["spine2"], {}),
    ("MPX1012", "Abdominal pain with appendicolith", "male", 12, "abdomen", ["T206"], [], ["abdomen2"], {"no_treatment": True}),
]

IMAGE_SPECS = {
    "chest": ("chest", (320, 288), "XR", "PA", "Chest"),
    "brain": ("brain", (320, 320), "MR", "Axial", "Brain"),
    "brain2": ("brain", (288, 320), "MR", "Coronal", "Brain"),
    "brain3": ("brain", (320, 300), "CT", "Axial", "Brain"),
    "knee": ("knee", (320, 300), "XR", "AP", "Knee"),
    "foot": ("foot", (384, 320), "XR", "Oblique", "Foot"),
    "foot2": ("foot", (384, 288), "XR", "AP", "Foot"),
    "spine": ("spine", (320, 300), "XR", "Lateral", "Lumbar spine"),
    "spine2": ("spine", (300, 300), "CT", "Sagittal", "Thoracolumbar spine"),
    "abdomen": ("abdomen", (320, 256), "CT", "Axial", "Abdomen"),
    "abdomen2": ("abdomen", (300, 256), "CT", "Coronal", "Abdomen"),
    "shared": ("chest", (300, 288), "XR", "AP", "Chest"),
}

ORGAN = {"chest": "Lung", "brain": "Brain", "knee": "Knee", "foot": "Foot", "spine": "Spine", "abdomen": "Bowel"}


def write_json(path, value):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(value, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def main():
    rendered = {}
    (ROOT / "images").mkdir(exist_ok=True)
    for key, (shape, size, *_rest) in IMAGE_SPECS.items():
        buf = io.BytesIO()
        radiograph(key, size, SHAPES[shape]()).save(buf, format="PNG", optimize=False)
        rendered[key] = buf.getvalue()

    case_ids = []
    for n, (cid, title, sex, age, region, topics, questions, image_keys, extra) in enumerate(CASES):
        case_ids.append(cid)
        images = []
        for i, key in enumerate(image_keys, start=1):
            shape, size, modality, plane, location = IMAGE_SPECS[key]
            # each case references its own file name; the shared one is a byte copy
            file_name = f"images/{cid.lower()}-{i}.png"
            (ROOT / file_name).write_bytes(rendered[key])
            image = {
                "imageId": f"{cid}-IMG{i}",
                "file": file_name,
                "caption": f"{modality} {plane.lower()} view of the {location.lower()}.",
                "modality": modality,
                "plane": plane,
                "location": location,
                "contrast": "None" if modality == "XR" else "IV gadolinium" if modality == "MR" else "IV iodinated",
                "sourceUrl": f"https://medpix.example.org/images/{cid}-{i}",
                "imageTechnicalDetails": {
                    "width": size[0],
                    "height": size[1],
                    "bitDepth": 8,
                    "colorSpace": "Grayscale",
                    "compression": "PNG deflate",
                    "manufacturer": "Fixture Imaging",
                    "modelName": f"FX-{modality}",
                    "sliceThickness": "n/a" if modality == "XR" else "3 mm",
                    "kvp": 70 if modality == "XR" else 120,
                    "exposure": "5 mAs",
                    "acquisitionDate": f"2014-0{1 + n % 9}-1{n % 10}",
                    "checksum": hashlib.sha256(rendered[key]).hexdigest()[:16],
                },
                "acr": {"organ": ORGAN[region], "pathology": "See diagnosis", "code": f"{n + 1}.{i}"},
                "license": "CC BY-NC-SA 4.0",
            }
            if modality == "XR":
                # radiographs carry no contrast agent; drop the field for variety
                del image["contrast"]
            images.append(image)
        topic = next(t for t in TOPICS if t["topicId"] == topics[0])
        case = {
            "caseId": cid,
            "title": title,
            "sex": sex,
            "age": age,
            "race": "Not stated" if n % 3 else "Caucasian",
            "history": f"{age}-year-old {sex} presenting with {title.lower()}.",
            "exam": "Focal tenderness; vital signs within normal limits.",
            "findings": topic["radiologyFindings"],
            "differentialDiagnosis": topic["differentialDiagnosis"],
            "diagnosis": {
                "name": topic["title"],
                "method": "Imaging" if n % 2 else "Imaging and clinical follow-up",
                "certainty": "Definite" if n % 4 else "Probable",
            },
            "treatment": topic["treatment"],
            "discussion": topic["diseaseDiscussion"] + " " + topic["clinicalPresentation"],
            "followUp": "Clinical review at six weeks.",
            "keywords": topic["keywords"][: 1 + n % 3],
            "author": {
                "name": topic["author"]["name"],
                "affiliation": topic["author"]["affiliation"],
                "email": "teaching@medpix.example.org",
                "country": "USA",
            },
            "submission": {
                "submitted": f"2015-0{1 + n % 9}-0{1 + n % 9}",
                "approved": f"2015-0{1 + n % 9}-2{n % 9}",
                "modified": "2019-01-15",
                "status": "approved",
            },
            "topics": topics,
            "questions": questions,
            "images": images,
        }
        if extra.get("no_followup"):
            del case["followUp"]
        if extra.get("no_race"):
            del case["race"]
        if extra.get("no_treatment"):
            del case["treatment"]
        if extra.get("no_approved"):
            del case["submission"]["approved"]
            case["submission"]["status"] = "pending"
        write_json(ROOT / "cases" / f"{cid}.json", case)

    pages = [case_ids[i : i + PAGE_SIZE] for i in range(0, len(case_ids), PAGE_SIZE)]
    for i, ids in enumerate(pages, start=1):
        nxt = f"cases/page-{i + 1}.json" if i < len(pages) else None
        write_json(ROOT / "cases" / f"page-{i}.json", {"page": i, "cases": ids, "next": nxt})
    for t in TOPICS:
        write_json(ROOT / "topics" / f"{t['topicId']}.json", t)
    for qid, q in QUESTIONS.items():
        write_json(ROOT / "questions" / f"{qid}.json", q)
    write_json(
        ROOT / "index.json",
        {
            "name": "MedPix-style teaching file fixture",
            "cases": "cases/page-1.json",
            "counts": {"cases": len(CASES), "topics": len(TOPICS), "questions": len(QUESTIONS)},
        },
    )


if __name__ == "__main__":
    main()
