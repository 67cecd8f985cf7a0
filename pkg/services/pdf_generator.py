"""
Генератор PDF отчётов об оценке студента
"""

from fpdf import FPDF
from datetime import datetime
from pathlib import Path
from typing import Mapping, Optional
import os


class PDF(FPDF):
    def header(self):
        # Заголовок
        self.set_font('Helvetica', 'B', 18)
        self.set_text_color(102, 126, 234)
        self.cell(0, 10, 'FlowDistill - Evaluation Report', align='C', new_x='LMARGIN', new_y='NEXT')
        self.ln(4)

    def footer(self):
        self.set_y(-15)
        self.set_font('Helvetica', '', 8)
        self.set_text_color(156, 163, 175)
        self.cell(0, 10, f'Created: {datetime.now().strftime("%d.%m.%Y %H:%M")}', align='C')


def _level_color(reduction: Optional[float]) -> tuple:
    """Цвет блока по снижению EPE* после дообучения"""
    if reduction is None:
        return 102, 126, 234
    if reduction >= 60:
        return 16, 185, 129  # зелёный
    if reduction >= 30:
        return 245, 158, 11  # оранжевый
    return 239, 68, 68  # красный


def _ascii(text: str) -> str:
    # базовые шрифты PDF умеют только latin-1
    return str(text).encode('ascii', 'ignore').decode('ascii')


def generate_pdf_report(
    summaries: Mapping[str, dict],
    dataset_name: str,
    boxplot_path: Optional[str] = None,
    reduction: Optional[float] = None,
    output_path: Optional[str] = None
) -> str:
    """
    PDF отчёт об оценке: средний EPE*, боксплот, SSIM

    Args:
        summaries: имя модели -> summary_dict
        dataset_name: подпись датасета
        boxplot_path: PNG боксплота для вставки
        reduction: снижение среднего EPE* в процентах (для --compare)
        output_path: путь для сохранения PDF

    Returns:
        str: путь к созданному PDF файлу
    """
    if output_path is None:
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        output_path = f"reports/eval_report_{timestamp}.pdf"

    # Создаём директорию если её нет
    os.makedirs(os.path.dirname(output_path) or ".", exist_ok=True)

    pdf = PDF()
    pdf.add_page()

    # Главный блок: снижение ошибки или средний EPE*
    pdf.set_fill_color(*_level_color(reduction))
    pdf.set_text_color(255, 255, 255)
    pdf.set_font('Helvetica', 'B', 32)
    if reduction is not None:
        headline = f'EPE* -{reduction:.1f}%'
    else:
        first = next(iter(summaries.values()))
        headline = f'EPE* {first["mean_epe"]:.4f}'
    pdf.cell(0, 26, headline, align='C', fill=True, new_x='LMARGIN', new_y='NEXT')
    pdf.ln(6)

    pdf.set_text_color(31, 41, 55)
    pdf.set_font('Helvetica', '', 13)
    pdf.cell(0, 9, _ascii(f'Dataset: {dataset_name}'), align='C', new_x='LMARGIN', new_y='NEXT')
    pdf.ln(4)

    # Разделитель
    pdf.set_draw_color(229, 231, 235)
    pdf.line(20, pdf.get_y(), 190, pdf.get_y())
    pdf.ln(6)

    # Таблица по моделям
    pdf.set_font('Helvetica', 'B', 11)
    pdf.set_text_color(102, 126, 234)
    columns = ('model', 'mean EPE*', 'median', 'Q1', 'Q3', 'outliers', 'SSIM')
    widths = (44, 26, 22, 22, 22, 22, 22)
    for name, width in zip(columns, widths):
        pdf.cell(width, 8, name, border='B')
    pdf.ln(8)

    pdf.set_font('Helvetica', '', 10)
    pdf.set_text_color(75, 85, 99)
    for model, summary in summaries.items():
        box = summary['boxplot']
        ssim_mean = summary.get('ssim', {}).get('mean')
        values = (
            _ascii(model)[:22],
            f'{summary["mean_epe"]:.4f}',
            f'{box["median"]:.4f}',
            f'{box["lower_quartile"]:.4f}',
            f'{box["upper_quartile"]:.4f}',
            str(len(box["outliers"])),
            '-' if ssim_mean is None else f'{ssim_mean:.4f}',
        )
        for value, width in zip(values, widths):
            pdf.cell(width, 7, value)
        pdf.ln(7)

    if boxplot_path and Path(boxplot_path).exists():
        pdf.ln(6)
        pdf.image(str(boxplot_path), x=25, w=160)

    # Сохраняем PDF
    pdf.output(output_path)

    return output_path
